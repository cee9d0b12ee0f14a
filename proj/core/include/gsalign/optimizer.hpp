#pragma once

#include "gsalign/gaussian_map.hpp"
#include "gsalign/param_grads.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gsalign {

struct OptimizerConfig {
    double position_lr_init = 1.6e-4;
    double position_lr_final = 1.6e-6;
    /// Steps over which the position rate decays log-linearly from init to final.
    std::uint64_t position_lr_horizon = 30000;
    double sh_dc_lr = 2.5e-3;
    double sh_rest_lr = 1.25e-4;
    double opacity_lr = 5e-2;
    double log_scale_lr = 5e-3;
    double rotation_lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-15;

    void validate() const;
};

/// Adaptive-moment optimizer with per-attribute learning rates. Moments are kept per
/// primitive in the flattened order of ParamGrads::flatten().
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig config = {}, std::size_t size = 0);

    /// Applies one update to every primitive and renormalizes quaternions. Throws
    /// InvalidParameter naming the primitive and attribute of a non-finite gradient.
    void step(GaussianMap& map, const ParamGrads& grads);

    /// Keeps moments of `survivors` (in that order) and appends `n_new` zeroed entries.
    void resize_for_densify(std::span<const std::size_t> survivors, std::size_t n_new);

    double position_lr() const { return position_lr_at(step_ + 1); }
    double position_lr_at(std::uint64_t step) const;

    std::uint64_t step_count() const { return step_; }
    std::size_t size() const { return first_.size() / kParamsPerPrimitive; }
    const OptimizerConfig& config() const { return config_; }
    std::span<const double> first_moment() const { return first_; }
    std::span<const double> second_moment() const { return second_; }

private:
    OptimizerConfig config_;
    std::uint64_t step_ = 0;
    std::vector<double> first_;
    std::vector<double> second_;
};

}  // namespace gsalign
