#pragma once

#include "gsalign/gaussian_map.hpp"
#include "gsalign/geometry.hpp"
#include "gsalign/param_grads.hpp"
#include "gsalign/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace gsalign {

/// How per-splat gradient contributions from many pixels are summed.
enum class ReductionMode {
    /// Per-(tile, splat) partial sums in pixel order, merged in tile order.
    deterministic,
    /// Pixel-wise pass uses shared atomic accumulators; splat-wise pass is unchanged.
    parallel,
};

enum class BackwardMode { pixel, splat };

struct RasterOptions {
    int tile_size = 16;
    /// Pixel states are stored before every checkpoint_interval-th splat of a tile list.
    int checkpoint_interval = 32;
    double min_transmittance = 1e-4;
    double alpha_min = 1.0 / 255.0;
    double alpha_max = 0.99;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    double near_plane = 0.01;
    double dilation = 0.3;
    int sh_degree = 3;
    bool checkpointing = true;
    ReductionMode reduction = ReductionMode::deterministic;
    /// Worker count for data-parallel loops; 0 leaves the OpenMP default.
    int num_threads = 0;

    void validate() const;
};

/// A primitive projected onto the image plane.
template <typename S>
struct Projected2D {
    Vec2<S> mean2d;
    /// Dilated screen-space covariance.
    Mat2<S> cov2d;
    /// Inverse of cov2d as (a, b, c) for [[a, b], [b, c]].
    Vec3<S> conic;
    S depth;
    S opacity;
    /// Exponents below this give alpha under alpha_min for certain (cheap early reject).
    S power_floor;
    Vec3<S> rgb;
    std::uint32_t primitive_index;
    int radius;
    /// Inclusive tile rectangle covered by the 3-sigma footprint.
    int tile_min_x, tile_min_y, tile_max_x, tile_max_y;
};

template <typename S>
struct PixelState {
    S transmittance;
    Vec3<S> accumulated_rgb;
};

template <typename S>
struct RenderOutput {
    Image image;
    RasterOptions options;
    int width = 0;
    int height = 0;
    int tiles_x = 0;
    int tiles_y = 0;
    std::size_t map_size = 0;

    /// Visible splats, in ascending primitive index.
    std::vector<Projected2D<S>> splats;
    /// CSR over tiles: tile t owns tile_lists[tile_ranges[t] .. tile_ranges[t + 1]).
    std::vector<std::uint32_t> tile_ranges;
    /// Indices into `splats`, sorted by (depth, primitive index) within each tile.
    std::vector<std::uint32_t> tile_lists;

    /// Per pixel: one past the tile-list position of the last blended splat.
    std::vector<std::uint32_t> contrib_count;
    std::vector<S> final_transmittance;
    /// Per pixel RGB accumulated from splats only (background excluded).
    std::vector<S> final_rgb;
    /// Per tile: max contrib_count over its pixels.
    std::vector<std::uint32_t> tile_max_contrib;

    bool has_checkpoints = false;
    /// Per tile, bucket-major: [bucket * tile_pixels + local_pixel].
    std::vector<std::vector<PixelState<S>>> checkpoints;

    int tile_pixels() const { return options.tile_size * options.tile_size; }
    int tile_count() const { return tiles_x * tiles_y; }
    std::size_t tile_list_size(int tile) const { return tile_ranges[tile + 1] - tile_ranges[tile]; }
    /// Buckets of checkpoint_interval splats that contain at least one blended splat.
    int bucket_count(int tile) const;
    const PixelState<S>& checkpoint(int tile, int bucket, int local_pixel) const;
};

/// One blended splat at a pixel, in blend order.
struct BlendRecord {
    std::uint32_t primitive_index;
    double alpha;
    /// Transmittance before this splat.
    double transmittance;
};

/// Projects one primitive; std::nullopt when culled (behind the near plane or the
/// 3-sigma footprint misses the image).
template <typename S>
std::optional<Projected2D<S>> project_gaussian(const GaussianPrimitive& primitive,
                                               const Camera& camera,
                                               const RasterOptions& options = {});

/// Tile-based front-to-back alpha blending. Throws InvalidParameter naming the index of
/// the first non-finite primitive.
template <typename S>
RenderOutput<S> rasterize_forward(const GaussianMap& map, const Camera& camera,
                                  const RasterOptions& options = {});

/// Reverse traversal per pixel with shared per-splat accumulation.
template <typename S>
ParamGrads backward_pixelwise(const RenderOutput<S>& render, const GaussianMap& map,
                              const Camera& camera, const Image& grad_image);

/// Tile x bucket work units that replay pixel states from forward checkpoints.
template <typename S>
ParamGrads backward_splatwise(const RenderOutput<S>& render, const GaussianMap& map,
                              const Camera& camera, const Image& grad_image);

template <typename S>
ParamGrads backward(BackwardMode mode, const RenderOutput<S>& render, const GaussianMap& map,
                    const Camera& camera, const Image& grad_image) {
    return mode == BackwardMode::pixel ? backward_pixelwise(render, map, camera, grad_image)
                                       : backward_splatwise(render, map, camera, grad_image);
}

/// Re-blends pixel (x, y) starting from the stored checkpoint of `bucket` and returns the
/// final color including background.
template <typename S>
Vec3<S> replay_pixel(const RenderOutput<S>& render, int x, int y, int bucket);

/// Lists the splats blended into pixel (x, y) with their alpha and incoming transmittance.
template <typename S>
std::vector<BlendRecord> trace_pixel(const RenderOutput<S>& render, int x, int y);

}  // namespace gsalign
