#pragma once

#include "gsalign/gaussian_map.hpp"
#include "gsalign/posed_dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace gsalign {

struct SyntheticOptions {
    int n_gaussians = 500;
    int n_frames = 50;
    /// Square image side in pixels.
    int image_size = 128;
    std::uint64_t seed = 7;
    /// Visible ground-truth centers sampled into each frame's point file.
    int points_per_frame = 40;
    /// Standard deviation of the positional noise added to sampled points.
    double point_noise = 0.01;
    double orbit_radius = 2.2;
    /// Seconds between consecutive poses.
    double frame_period = 0.1;
    /// Image timestamps deviate from their pose by up to this much.
    double image_jitter = 0.02;
    void validate() const;
};

/// Ground truth and rendered targets of one generated scene.
struct SyntheticScene {
    SyntheticOptions options;
    GaussianMap ground_truth;
    Intrinsics intrinsics;
    std::vector<TrajectoryEntry> trajectory;
    std::vector<double> image_timestamps;
    std::vector<Camera> cameras;
    std::vector<Image> images;
    std::vector<std::vector<ColoredPoint>> points;
};

/// Samples primitives in the unit box centered at the origin and renders them from an
/// orbit of cameras looking at their centroid. Deterministic for a given seed.
SyntheticScene generate_synthetic(const SyntheticOptions& options);

/// Writes the scene in PosedDataset layout, with 16-bit PPM images and gt_map.ply.
void write_synthetic(const SyntheticScene& scene, const std::filesystem::path& root);

/// generate_synthetic followed by write_synthetic.
SyntheticScene gen_synthetic(const SyntheticOptions& options, const std::filesystem::path& root);

}  // namespace gsalign
