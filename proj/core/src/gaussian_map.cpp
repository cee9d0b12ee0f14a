#include "gsalign/gaussian_map.hpp"
#include "gsalign/error.hpp"

#include <cmath>
#include <string>

namespace gsalign {

namespace {

bool finite_primitive(const GaussianPrimitive& p) {
    if (!p.position.allFinite() || !p.rotation.allFinite() || !p.log_scale.allFinite())
        return false;
    if (!std::isfinite(p.opacity_logit)) return false;
    for (float c : p.sh)
        if (!std::isfinite(c)) return false;
    return true;
}

std::vector<bool> index_mask(std::span<const std::size_t> indices, std::size_t n) {
    std::vector<bool> mask(n, false);
    for (std::size_t i : indices) {
        if (i >= n)
            throw InvalidParameter("primitive index " + std::to_string(i) +
                                   " out of range for map of size " + std::to_string(n));
        if (mask[i]) throw InvalidParameter("duplicate primitive index " + std::to_string(i));
        mask[i] = true;
    }
    return mask;
}

}  // namespace

GaussianMap::GaussianMap(std::vector<GaussianPrimitive> primitives)
    : primitives_(std::move(primitives)), stats_(primitives_.size()) {}

void GaussianMap::insert(std::span<const GaussianPrimitive> primitives) {
    primitives_.insert(primitives_.end(), primitives.begin(), primitives.end());
    stats_.resize(primitives_.size());
}

void GaussianMap::remove(std::span<const std::size_t> indices) {
    if (indices.empty()) return;
    const std::vector<bool> drop = index_mask(indices, size());
    std::size_t out = 0;
    for (std::size_t i = 0; i < primitives_.size(); ++i) {
        if (drop[i]) continue;
        primitives_[out] = primitives_[i];
        stats_[out] = stats_[i];
        ++out;
    }
    primitives_.resize(out);
    stats_.resize(out);
}

void GaussianMap::gather(std::span<const std::size_t> indices) {
    index_mask(indices, size());
    std::vector<GaussianPrimitive> prims;
    std::vector<GradStats> stats;
    prims.reserve(indices.size());
    stats.reserve(indices.size());
    for (std::size_t i : indices) {
        prims.push_back(primitives_[i]);
        stats.push_back(stats_[i]);
    }
    primitives_ = std::move(prims);
    stats_ = std::move(stats);
}

void GaussianMap::reset_grad_stats() {
    for (auto& s : stats_) s = GradStats{};
}

void GaussianMap::check_finite() const {
    for (std::size_t i = 0; i < primitives_.size(); ++i)
        if (!finite_primitive(primitives_[i]))
            throw InvalidParameter("primitive " + std::to_string(i) +
                                   " holds a non-finite parameter");
}

}  // namespace gsalign
