#include "gsalign/optimizer.hpp"
#include "gsalign/error.hpp"

#include <cmath>
#include <string>

namespace gsalign {

namespace {

constexpr const char* attribute_name(int j) {
    if (j < 3) return "position";
    if (j < 7) return "rotation";
    if (j < 10) return "log_scale";
    if (j < 11) return "opacity_logit";
    return "sh";
}

}  // namespace

void OptimizerConfig::validate() const {
    for (double lr : {position_lr_init, position_lr_final, sh_dc_lr, sh_rest_lr, opacity_lr,
                      log_scale_lr, rotation_lr})
        if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidParameter("learning rates must be finite and >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
        throw InvalidParameter("optimizer betas must be in [0, 1)");
    if (!(epsilon >= 0.0)) throw InvalidParameter("optimizer epsilon must be >= 0");
}

Optimizer::Optimizer(OptimizerConfig config, std::size_t size)
    : config_(config),
      first_(size * kParamsPerPrimitive, 0.0),
      second_(size * kParamsPerPrimitive, 0.0) {
    config_.validate();
}

double Optimizer::position_lr_at(std::uint64_t step) const {
    if (config_.position_lr_init <= 0.0 || config_.position_lr_final <= 0.0) return 0.0;
    const double t = config_.position_lr_horizon == 0
                         ? 1.0
                         : std::min(1.0, double(step) / double(config_.position_lr_horizon));
    return std::exp(std::log(config_.position_lr_init) * (1.0 - t) +
                    std::log(config_.position_lr_final) * t);
}

void Optimizer::step(GaussianMap& map, const ParamGrads& grads) {
    if (grads.size() != map.size())
        throw InvalidParameter("gradient count " + std::to_string(grads.size()) +
                               " does not match map size " + std::to_string(map.size()));
    if (size() != map.size())
        throw InvalidParameter("optimizer state tracks " + std::to_string(size()) +
                               " primitives but the map has " + std::to_string(map.size()));
    const std::vector<double> flat = grads.flatten();
    for (std::size_t k = 0; k < flat.size(); ++k)
        if (!std::isfinite(flat[k]))
            throw InvalidParameter("non-finite gradient for primitive " +
                                   std::to_string(k / kParamsPerPrimitive) + " attribute " +
                                   attribute_name(static_cast<int>(k % kParamsPerPrimitive)));

    ++step_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double bias1 = 1.0 - std::pow(b1, double(step_));
    const double bias2 = 1.0 - std::pow(b2, double(step_));

    double lr[kParamsPerPrimitive];
    const double pos_lr = position_lr_at(step_);
    for (int j = 0; j < kParamsPerPrimitive; ++j) {
        if (j < 3) lr[j] = pos_lr;
        else if (j < 7) lr[j] = config_.rotation_lr;
        else if (j < 10) lr[j] = config_.log_scale_lr;
        else if (j < 11) lr[j] = config_.opacity_lr;
        else if (j < 14) lr[j] = config_.sh_dc_lr;
        else lr[j] = config_.sh_rest_lr;
    }

    for (std::size_t i = 0; i < map.size(); ++i) {
        GaussianPrimitive& prim = map[i];
        float* params[kParamsPerPrimitive];
        for (int j = 0; j < 3; ++j) params[j] = &prim.position[j];
        for (int j = 0; j < 4; ++j) params[3 + j] = &prim.rotation[j];
        for (int j = 0; j < 3; ++j) params[7 + j] = &prim.log_scale[j];
        params[10] = &prim.opacity_logit;
        for (int j = 0; j < kShCoeffCount; ++j) params[11 + j] = &prim.sh[j];

        for (int j = 0; j < kParamsPerPrimitive; ++j) {
            const std::size_t k = i * kParamsPerPrimitive + j;
            const double g = flat[k];
            first_[k] = b1 * first_[k] + (1.0 - b1) * g;
            second_[k] = b2 * second_[k] + (1.0 - b2) * g * g;
            const double m_hat = first_[k] / bias1;
            const double v_hat = second_[k] / bias2;
            const double update = lr[j] * m_hat / (std::sqrt(v_hat) + config_.epsilon);
            *params[j] = static_cast<float>(double(*params[j]) - update);
        }
        const float norm = prim.rotation.norm();
        if (norm > 0.0f) prim.rotation /= norm;
        else prim.rotation = Eigen::Vector4f(1.0f, 0.0f, 0.0f, 0.0f);
    }
}

void Optimizer::resize_for_densify(std::span<const std::size_t> survivors, std::size_t n_new) {
    const std::size_t n = size();
    std::vector<bool> seen(n, false);
    for (std::size_t i : survivors) {
        if (i >= n)
            throw InvalidParameter("survivor index " + std::to_string(i) + " out of range for " +
                                   std::to_string(n) + " optimizer entries");
        if (seen[i]) throw InvalidParameter("duplicate survivor index " + std::to_string(i));
        seen[i] = true;
    }
    const std::size_t total = (survivors.size() + n_new) * kParamsPerPrimitive;
    std::vector<double> first(total, 0.0), second(total, 0.0);
    for (std::size_t out = 0; out < survivors.size(); ++out)
        for (int j = 0; j < kParamsPerPrimitive; ++j) {
            first[out * kParamsPerPrimitive + j] = first_[survivors[out] * kParamsPerPrimitive + j];
            second[out * kParamsPerPrimitive + j] = second_[survivors[out] * kParamsPerPrimitive + j];
        }
    first_ = std::move(first);
    second_ = std::move(second);
}

}  // namespace gsalign
