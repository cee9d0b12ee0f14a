#pragma once

#include "gsalign/types.hpp"

#include <cstdint>
#include <vector>

namespace gsalign {

/// Gradient of a scalar objective with respect to one primitive's raw parameters.
struct PrimitiveGrad {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector4d rotation = Eigen::Vector4d::Zero();
    Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
    double opacity_logit = 0.0;
    std::array<double, kShCoeffCount> sh{};
};

/// Number of scalars in a flattened PrimitiveGrad.
inline constexpr int kParamsPerPrimitive = 3 + 4 + 3 + 1 + kShCoeffCount;

struct ParamGrads {
    std::vector<PrimitiveGrad> primitives;
    /// Norm of the gradient w.r.t. the projected 2D mean, in NDC units (pixels * size / 2).
    std::vector<double> mean2d_norm;
    /// Number of pixels each primitive was blended into.
    std::vector<std::uint32_t> contributions;

    ParamGrads() = default;
    explicit ParamGrads(std::size_t n) : primitives(n), mean2d_norm(n, 0.0), contributions(n, 0) {}

    std::size_t size() const { return primitives.size(); }
    bool all_finite() const;

    /// Per primitive: position(3), rotation(4), log_scale(3), opacity_logit(1), sh(48).
    std::vector<double> flatten() const;
};

/// Fraction of the largest block magnitude below which a block's own scale is not trusted.
inline constexpr double kRelativeDifferenceFloor = 1e-4;

/// Largest elementwise difference between two gradient sets, normalized per parameter
/// block (position, rotation, log_scale, opacity, sh) by the block's largest magnitude
/// in `reference`, floored at kRelativeDifferenceFloor times the largest block magnitude.
/// When `reference` is identically zero the differences are compared absolutely.
double max_relative_difference(const ParamGrads& candidate, const ParamGrads& reference);

}  // namespace gsalign
