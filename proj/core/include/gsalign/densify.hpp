#pragma once

#include "gsalign/gaussian_map.hpp"
#include "gsalign/param_grads.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace gsalign {

struct DensifyConfig {
    /// Iterations between densify_and_prune calls.
    std::uint64_t interval = 500;
    /// Mean NDC-space positional gradient norm above which a primitive is densified.
    double grad_threshold = 0.001;
    double prune_opacity = 0.02;
    /// Clone when the largest scale is at most this fraction of the scene extent, else split.
    double split_scale_percentile = 0.01;
    int split_children = 2;
    double split_scale_shrink = 1.6;
    /// Distance a clone is moved along the negative mean positional gradient.
    double clone_step = 1.6e-4;

    void validate() const;
};

struct ColoredPoint {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    /// RGB in [0, 1].
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

inline constexpr double kSeedOpacity = 0.1;
inline constexpr double kMinSeedScale = 1e-4;

/// One isotropic primitive per point, sized by the mean distance to its 3 nearest
/// neighbours among the other points and the optional `existing` positions (typically the
/// current map). A point with no neighbour at all falls back to 0.01 * scene_extent.
std::vector<GaussianPrimitive> seed_from_points(std::span<const ColoredPoint> points,
                                                double scene_extent = 1.0,
                                                std::span<const Eigen::Vector3d> existing = {});

/// Adds one view's 2D gradient norms to the statistics of primitives that were blended.
void accumulate_grad_stats(GaussianMap& map, const ParamGrads& grads);

struct DensifyResult {
    /// Indices (before the call) of primitives kept, in their new order at the map front.
    std::vector<std::size_t> survivors;
    /// Primitives appended after the survivors.
    std::size_t n_new = 0;
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
};

/// Clone or split high-gradient primitives, then prune low-opacity ones and reset statistics.
DensifyResult densify_and_prune(GaussianMap& map, const DensifyConfig& config,
                                double scene_extent, std::mt19937_64& rng);

}  // namespace gsalign
