#pragma once

#include "gsalign/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gsalign {

/// Densification statistics gathered between two densification events.
struct GradStats {
    /// Sum of per-view 2D positional gradient norms (NDC-scaled).
    double grad_norm_sum = 0.0;
    /// Number of views in which the primitive contributed to at least one pixel.
    std::uint32_t observations = 0;
    /// Sum of the 3D positional gradient over the same views.
    Eigen::Vector3d position_grad_sum = Eigen::Vector3d::Zero();

    double mean_grad_norm() const {
        return observations == 0 ? 0.0 : grad_norm_sum / observations;
    }
};

/// Growable store of Gaussian primitives. Statistics stay index-aligned with primitives.
class GaussianMap {
public:
    GaussianMap() = default;
    explicit GaussianMap(std::vector<GaussianPrimitive> primitives);

    std::size_t size() const { return primitives_.size(); }
    bool empty() const { return primitives_.empty(); }

    const std::vector<GaussianPrimitive>& primitives() const { return primitives_; }
    std::vector<GaussianPrimitive>& primitives() { return primitives_; }
    const GaussianPrimitive& operator[](std::size_t i) const { return primitives_[i]; }
    GaussianPrimitive& operator[](std::size_t i) { return primitives_[i]; }

    const std::vector<GradStats>& grad_stats() const { return stats_; }
    std::vector<GradStats>& grad_stats() { return stats_; }

    /// Appends primitives with empty statistics.
    void insert(std::span<const GaussianPrimitive> primitives);

    /// Removes the given indices, keeping survivors in their original order.
    /// Throws InvalidParameter on an out-of-range or repeated index.
    void remove(std::span<const std::size_t> indices);

    /// Keeps exactly the listed indices in the listed order. Same validation as remove.
    void gather(std::span<const std::size_t> indices);

    void reset_grad_stats();

    /// Throws InvalidParameter naming the first primitive holding a non-finite value.
    void check_finite() const;

    bool operator==(const GaussianMap& other) const { return primitives_ == other.primitives_; }

private:
    std::vector<GaussianPrimitive> primitives_;
    std::vector<GradStats> stats_;
};

}  // namespace gsalign
