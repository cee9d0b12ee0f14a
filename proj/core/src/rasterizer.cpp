#include "gsalign/rasterizer.hpp"
#include "gsalign/error.hpp"
#include "gsalign/spherical_harmonics.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

namespace gsalign {

void RasterOptions::validate() const {
    if (tile_size < 1) throw InvalidParameter("tile_size must be >= 1");
    if (checkpoint_interval < 1) throw InvalidParameter("checkpoint_interval must be >= 1");
    if (!(alpha_max > 0.0 && alpha_max <= 1.0)) throw InvalidParameter("alpha_max must be in (0, 1]");
    if (!(alpha_min >= 0.0 && alpha_min <= alpha_max))
        throw InvalidParameter("alpha_min must be in [0, alpha_max]");
    if (!(min_transmittance >= 0.0 && min_transmittance < 1.0))
        throw InvalidParameter("min_transmittance must be in [0, 1)");
    if (!(near_plane > 0.0)) throw InvalidParameter("near_plane must be positive");
    if (!(dilation >= 0.0)) throw InvalidParameter("dilation must be non-negative");
    if (sh_degree < 0 || sh_degree > kMaxShDegree) throw InvalidParameter("sh_degree must be in 0..3");
    if (num_threads < 0) throw InvalidParameter("num_threads must be >= 0");
}

template <typename S>
int RenderOutput<S>::bucket_count(int tile) const {
    const int b = options.checkpoint_interval;
    return static_cast<int>((tile_max_contrib[tile] + b - 1) / b);
}

template <typename S>
const PixelState<S>& RenderOutput<S>::checkpoint(int tile, int bucket, int local_pixel) const {
    return checkpoints[tile][static_cast<std::size_t>(bucket) * tile_pixels() + local_pixel];
}

namespace {

int worker_count(const RasterOptions& options) {
    return options.num_threads > 0 ? options.num_threads : omp_get_max_threads();
}

template <typename S>
struct AlphaEval {
    S alpha;
    S gauss;
    S dx;
    S dy;
    bool clamped;
};

// Shared by forward, replay and both backward passes so blend decisions agree bit for bit.
template <typename S>
inline bool evaluate_alpha(const Projected2D<S>& s, S px, S py, S alpha_min, S alpha_max,
                           AlphaEval<S>& e) {
    e.dx = px - s.mean2d[0];
    e.dy = py - s.mean2d[1];
    const S power = S(-0.5) * (s.conic[0] * e.dx * e.dx + s.conic[2] * e.dy * e.dy) -
                    s.conic[1] * e.dx * e.dy;
    if (power < s.power_floor) return false;
    e.gauss = std::exp(power);
    const S weighted = s.opacity * e.gauss;
    e.clamped = weighted > alpha_max;
    e.alpha = e.clamped ? alpha_max : weighted;
    return e.alpha >= alpha_min;
}

// Screen-space gradient slots of one splat.
enum Slot { kMeanX, kMeanY, kConicA, kConicB, kConicC, kOpacity, kRed, kGreen, kBlue, kCount, kSlots };

template <typename S>
using ScreenGrad = std::array<S, kSlots>;

// Gradient contribution of one (pixel, splat) pair.
//   transmittance: T before the splat
//   behind:        foreground color blended after this splat, as seen through T
//   bg_term:       (T_final / (1 - alpha)) * dot(background, dL/dpixel)
template <typename S>
inline void add_pair_gradient(const Projected2D<S>& s, const AlphaEval<S>& e, S transmittance,
                              const Vec3<S>& behind, S bg_term, const Vec3<S>& dl_dpix, S* out) {
    S dl_dalpha = -bg_term;
    for (int c = 0; c < 3; ++c) {
        out[kRed + c] += e.alpha * transmittance * dl_dpix[c];
        dl_dalpha += dl_dpix[c] * (transmittance * s.rgb[c] - behind[c]);
    }
    out[kCount] += S(1);
    if (e.clamped) return;
    out[kOpacity] += e.gauss * dl_dalpha;
    const S dl_dpower = e.gauss * s.opacity * dl_dalpha;
    const S a = s.conic[0], b = s.conic[1], c = s.conic[2];
    out[kMeanX] += dl_dpower * (a * e.dx + b * e.dy);
    out[kMeanY] += dl_dpower * (b * e.dx + c * e.dy);
    out[kConicA] += S(-0.5) * e.dx * e.dx * dl_dpower;
    out[kConicB] += -e.dx * e.dy * dl_dpower;
    out[kConicC] += S(-0.5) * e.dy * e.dy * dl_dpower;
}

struct TileRect {
    int x0, y0, x1, y1;  // pixel bounds, exclusive end
};

TileRect tile_rect(int tile, int tiles_x, int tile_size, int width, int height) {
    const int tx = tile % tiles_x;
    const int ty = tile / tiles_x;
    TileRect r;
    r.x0 = tx * tile_size;
    r.y0 = ty * tile_size;
    r.x1 = std::min(r.x0 + tile_size, width);
    r.y1 = std::min(r.y0 + tile_size, height);
    return r;
}

template <typename S>
Vec3<S> pixel_grad(const Image& grad_image, int x, int y) {
    const std::size_t i = grad_image.index(x, y, 0);
    return Vec3<S>(S(grad_image.data[i]), S(grad_image.data[i + 1]), S(grad_image.data[i + 2]));
}

template <typename S>
void check_backward_inputs(const RenderOutput<S>& render, const GaussianMap& map,
                           const Camera& camera, const Image& grad_image) {
    if (grad_image.width != render.width || grad_image.height != render.height)
        throw InvalidParameter("grad_image shape " + std::to_string(grad_image.width) + "x" +
                               std::to_string(grad_image.height) + " does not match render " +
                               std::to_string(render.width) + "x" +
                               std::to_string(render.height));
    if (grad_image.data.size() != grad_image.pixel_count() * 3)
        throw InvalidParameter("grad_image buffer size does not match its dimensions");
    if (map.size() != render.map_size)
        throw InvalidParameter("map size changed since the forward pass");
    if (camera.width != render.width || camera.height != render.height)
        throw InvalidParameter("camera does not match the forward pass");
    if (!(render.options.alpha_max < 1.0))
        throw InvalidParameter("backward requires alpha_max < 1");
}

// Offsets of the (tile, list position) partial-sum slots. Only positions below the tile's
// max contributor count can receive gradient.
template <typename S>
std::vector<std::size_t> slot_offsets(const RenderOutput<S>& render) {
    std::vector<std::size_t> offsets(render.tile_count() + 1, 0);
    for (int t = 0; t < render.tile_count(); ++t)
        offsets[t + 1] = offsets[t] + render.tile_max_contrib[t];
    return offsets;
}

// Sums partial slots per splat in ascending tile order.
template <typename S>
std::vector<ScreenGrad<S>> merge_partials(const RenderOutput<S>& render,
                                          const std::vector<std::size_t>& offsets,
                                          const std::vector<S>& partial, int workers) {
    const std::size_t n = render.splats.size();
    std::vector<std::size_t> starts(n + 1, 0);
    for (int t = 0; t < render.tile_count(); ++t) {
        const std::uint32_t base = render.tile_ranges[t];
        for (std::uint32_t pos = 0; pos < render.tile_max_contrib[t]; ++pos)
            ++starts[render.tile_lists[base + pos] + 1];
    }
    for (std::size_t i = 0; i < n; ++i) starts[i + 1] += starts[i];
    std::vector<std::size_t> slots(starts[n]);
    std::vector<std::size_t> fill(starts.begin(), starts.end() - 1);
    for (int t = 0; t < render.tile_count(); ++t) {
        const std::uint32_t base = render.tile_ranges[t];
        for (std::uint32_t pos = 0; pos < render.tile_max_contrib[t]; ++pos)
            slots[fill[render.tile_lists[base + pos]]++] = offsets[t] + pos;
    }

    std::vector<ScreenGrad<S>> merged(n);
    const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(static) num_threads(workers)
    for (long long i = 0; i < count; ++i) {
        ScreenGrad<S> acc{};
        for (std::size_t k = starts[i]; k < starts[i + 1]; ++k) {
            const S* src = &partial[slots[k] * kSlots];
            for (int j = 0; j < kSlots; ++j) acc[j] += src[j];
        }
        merged[i] = acc;
    }
    return merged;
}

// Chains screen-space gradients back to the primitive parameters.
template <typename S>
ParamGrads chain_to_parameters(const RenderOutput<S>& render, const GaussianMap& map,
                               const Camera& camera, const std::vector<ScreenGrad<S>>& screen,
                               int workers) {
    ParamGrads grads(map.size());
    const Mat3<S> w = camera.rotation.cast<S>();
    const Vec3<S> t = camera.translation.cast<S>();
    const Vec3<S> cam_center = camera.center().cast<S>();
    const S fx = S(camera.fx), fy = S(camera.fy);
    const int degree = render.options.sh_degree;
    const S half_w = S(0.5) * S(render.width), half_h = S(0.5) * S(render.height);

    const long long count = static_cast<long long>(render.splats.size());
#pragma omp parallel for schedule(static) num_threads(workers)
    for (long long si = 0; si < count; ++si) {
        const Projected2D<S>& splat = render.splats[si];
        const ScreenGrad<S>& g = screen[si];
        const GaussianPrimitive& prim = map[splat.primitive_index];
        PrimitiveGrad& out = grads.primitives[splat.primitive_index];

        const Vec3<S> p = prim.position.cast<S>();
        const Vec4<S> q = prim.rotation.cast<S>();
        const Vec4<S> qu = q / q.norm();
        const Vec3<S> scale = prim.log_scale.cast<S>().array().exp().matrix();
        const Vec3<S> pc = w * p + t;
        const S x = pc[0], y = pc[1], z = pc[2];
        const S iz = S(1) / z, iz2 = iz * iz, iz3 = iz2 * iz;

        Eigen::Matrix<S, 2, 3> jac;
        jac << fx * iz, S(0), -fx * x * iz2, S(0), fy * iz, -fy * y * iz2;
        const Eigen::Matrix<S, 2, 3> tm = jac * w;
        const Mat3<S> rot = rotation_from_unit_quaternion(qu);
        Mat3<S> m = rot;
        for (int k = 0; k < 3; ++k) m.col(k) *= scale[k];
        const Mat3<S> sigma = m * m.transpose();

        Mat2<S> conic;
        conic << splat.conic[0], splat.conic[1], splat.conic[1], splat.conic[2];
        Mat2<S> g_conic;
        g_conic << g[kConicA], S(0.5) * g[kConicB], S(0.5) * g[kConicB], g[kConicC];
        const Mat2<S> g_cov2 = -conic * g_conic * conic;
        const Mat3<S> g_sigma = tm.transpose() * g_cov2 * tm;
        const Eigen::Matrix<S, 2, 3> g_tm = S(2) * g_cov2 * tm * sigma;
        const Eigen::Matrix<S, 2, 3> g_jac = g_tm * w.transpose();

        Vec3<S> g_pc;
        g_pc[0] = g[kMeanX] * fx * iz - g_jac(0, 2) * fx * iz2;
        g_pc[1] = g[kMeanY] * fy * iz - g_jac(1, 2) * fy * iz2;
        g_pc[2] = -g[kMeanX] * fx * x * iz2 - g[kMeanY] * fy * y * iz2 -
                  g_jac(0, 0) * fx * iz2 + g_jac(0, 2) * S(2) * fx * x * iz3 -
                  g_jac(1, 1) * fy * iz2 + g_jac(1, 2) * S(2) * fy * y * iz3;

        const Mat3<S> g_m = S(2) * g_sigma * m;
        Mat3<S> g_rot;
        for (int k = 0; k < 3; ++k) {
            S g_scale = S(0);
            for (int i = 0; i < 3; ++i) g_scale += g_m(i, k) * rot(i, k);
            out.log_scale[k] = double(g_scale * scale[k]);
            g_rot.col(k) = g_m.col(k) * scale[k];
        }
        const Vec4<S> g_q = normalize_grad(q, unit_quaternion_grad(qu, g_rot));
        out.rotation = g_q.template cast<double>();

        // View-dependent color.
        const Vec3<S> view = p - cam_center;
        const S view_norm = view.norm();
        const Vec3<S> dir = view / view_norm;
        const auto basis = sh_basis<S>(dir, degree);
        const Vec3<S> raw = sh_raw_color<S>(prim.sh, basis, degree);
        Vec3<S> g_rgb(g[kRed], g[kGreen], g[kBlue]);
        for (int c = 0; c < 3; ++c)
            if (raw[c] + S(0.5) < S(0)) g_rgb[c] = S(0);
        const int nb = sh_basis_count(degree);
        for (int k = 0; k < nb; ++k)
            for (int c = 0; c < 3; ++c) out.sh[k * 3 + c] = double(basis[k] * g_rgb[c]);
        Vec3<S> g_dir = Vec3<S>::Zero();
        if (degree > 0) {
            const auto dbasis = sh_basis_gradient<S>(dir, degree);
            for (int k = 1; k < nb; ++k) {
                S weight = S(0);
                for (int c = 0; c < 3; ++c) weight += g_rgb[c] * S(prim.sh[k * 3 + c]);
                g_dir += weight * dbasis[k];
            }
        }
        const Vec3<S> g_view = (g_dir - dir * dir.dot(g_dir)) / view_norm;

        out.position = (w.transpose() * g_pc + g_view).template cast<double>();
        out.opacity_logit = double(splat.opacity * (S(1) - splat.opacity) * g[kOpacity]);

        const S ndc_x = g[kMeanX] * half_w, ndc_y = g[kMeanY] * half_h;
        grads.mean2d_norm[splat.primitive_index] = double(std::sqrt(ndc_x * ndc_x + ndc_y * ndc_y));
        grads.contributions[splat.primitive_index] = static_cast<std::uint32_t>(g[kCount]);
    }
    return grads;
}

}  // namespace

// ---------------------------------------------------------------------------
// Projection
// ---------------------------------------------------------------------------

template <typename S>
std::optional<Projected2D<S>> project_gaussian(const GaussianPrimitive& prim, const Camera& camera,
                                               const RasterOptions& options) {
    const Mat3<S> w = camera.rotation.cast<S>();
    const Vec3<S> p = prim.position.cast<S>();
    const Vec3<S> pc = w * p + camera.translation.cast<S>();
    const S z = pc[2];
    if (!(z > S(options.near_plane))) return std::nullopt;

    const Vec4<S> q = prim.rotation.cast<S>();
    const S qn = q.norm();
    if (!(qn > S(0))) return std::nullopt;
    const Mat3<S> sigma = covariance_from_unit<S>(q / qn, prim.log_scale.cast<S>());

    const S fx = S(camera.fx), fy = S(camera.fy);
    const S iz = S(1) / z;
    Eigen::Matrix<S, 2, 3> jac;
    jac << fx * iz, S(0), -fx * pc[0] * iz * iz, S(0), fy * iz, -fy * pc[1] * iz * iz;
    const Eigen::Matrix<S, 2, 3> tm = jac * w;
    Mat2<S> cov2 = tm * sigma * tm.transpose();
    cov2(0, 0) += S(options.dilation);
    cov2(1, 1) += S(options.dilation);

    const S det = cov2(0, 0) * cov2(1, 1) - cov2(0, 1) * cov2(1, 0);
    if (!(det > S(0))) return std::nullopt;

    Projected2D<S> out;
    out.cov2d = cov2;
    out.conic = Vec3<S>(cov2(1, 1) / det, -cov2(0, 1) / det, cov2(0, 0) / det);
    out.mean2d = Vec2<S>(fx * pc[0] * iz + S(camera.cx), fy * pc[1] * iz + S(camera.cy));
    out.depth = z;

    const S mid = S(0.5) * (cov2(0, 0) + cov2(1, 1));
    const S lambda_max = mid + std::sqrt(std::max(mid * mid - det, S(0)));
    const S radius = std::ceil(S(3) * std::sqrt(lambda_max));
    if (!std::isfinite(radius) || !out.mean2d.allFinite()) return std::nullopt;
    const S limit = S(1e9);
    const S lo_x = std::clamp(std::ceil(out.mean2d[0] - radius - S(0.5)), -limit, limit);
    const S hi_x = std::clamp(std::floor(out.mean2d[0] + radius - S(0.5)), -limit, limit);
    const S lo_y = std::clamp(std::ceil(out.mean2d[1] - radius - S(0.5)), -limit, limit);
    const S hi_y = std::clamp(std::floor(out.mean2d[1] + radius - S(0.5)), -limit, limit);
    const int px0 = std::max(0, static_cast<int>(lo_x));
    const int px1 = std::min(camera.width - 1, static_cast<int>(hi_x));
    const int py0 = std::max(0, static_cast<int>(lo_y));
    const int py1 = std::min(camera.height - 1, static_cast<int>(hi_y));
    if (px0 > px1 || py0 > py1) return std::nullopt;
    out.radius = static_cast<int>(std::min(radius, limit));
    out.tile_min_x = px0 / options.tile_size;
    out.tile_max_x = px1 / options.tile_size;
    out.tile_min_y = py0 / options.tile_size;
    out.tile_max_y = py1 / options.tile_size;

    const Vec3<S> view = p - camera.center().cast<S>();
    const S vn = view.norm();
    const Vec3<S> dir = vn > S(0) ? Vec3<S>(view / vn) : Vec3<S>::UnitZ();
    const auto basis = sh_basis<S>(dir, options.sh_degree);
    const Vec3<S> raw = sh_raw_color<S>(prim.sh, basis, options.sh_degree);
    for (int c = 0; c < 3; ++c) out.rgb[c] = std::max(raw[c] + S(0.5), S(0));
    out.opacity = S(logistic(prim.opacity_logit));
    // 1e-3 of slack in log space dwarfs the rounding error of exp.
    out.power_floor = S(std::log(options.alpha_min / double(out.opacity)) - 1e-3);
    out.primitive_index = 0;
    return out;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

template <typename S>
RenderOutput<S> rasterize_forward(const GaussianMap& map, const Camera& camera,
                                  const RasterOptions& options) {
    options.validate();
    camera.validate();
    map.check_finite();
    const int workers = worker_count(options);

    RenderOutput<S> out;
    out.options = options;
    out.width = camera.width;
    out.height = camera.height;
    out.tiles_x = (camera.width + options.tile_size - 1) / options.tile_size;
    out.tiles_y = (camera.height + options.tile_size - 1) / options.tile_size;
    out.map_size = map.size();
    const int tiles = out.tile_count();
    const int tile_px = out.tile_pixels();

    // Projection.
    std::vector<std::optional<Projected2D<S>>> projected(map.size());
    const long long n_prims = static_cast<long long>(map.size());
#pragma omp parallel for schedule(static) num_threads(workers)
    for (long long i = 0; i < n_prims; ++i) {
        projected[i] = project_gaussian<S>(map[i], camera, options);
        if (projected[i]) projected[i]->primitive_index = static_cast<std::uint32_t>(i);
    }
    for (auto& p : projected)
        if (p) out.splats.push_back(*p);

    // Binning into depth-sorted tile lists.
    out.tile_ranges.assign(tiles + 1, 0);
    for (const auto& s : out.splats)
        for (int ty = s.tile_min_y; ty <= s.tile_max_y; ++ty)
            for (int tx = s.tile_min_x; tx <= s.tile_max_x; ++tx) ++out.tile_ranges[ty * out.tiles_x + tx + 1];
    for (int t = 0; t < tiles; ++t) out.tile_ranges[t + 1] += out.tile_ranges[t];
    out.tile_lists.resize(out.tile_ranges[tiles]);
    {
        std::vector<std::uint32_t> fill(out.tile_ranges.begin(), out.tile_ranges.end() - 1);
        for (std::uint32_t si = 0; si < out.splats.size(); ++si) {
            const auto& s = out.splats[si];
            for (int ty = s.tile_min_y; ty <= s.tile_max_y; ++ty)
                for (int tx = s.tile_min_x; tx <= s.tile_max_x; ++tx)
                    out.tile_lists[fill[ty * out.tiles_x + tx]++] = si;
        }
    }
#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (int t = 0; t < tiles; ++t) {
        auto first = out.tile_lists.begin() + out.tile_ranges[t];
        auto last = out.tile_lists.begin() + out.tile_ranges[t + 1];
        std::sort(first, last, [&](std::uint32_t a, std::uint32_t b) {
            const S da = out.splats[a].depth, db = out.splats[b].depth;
            return da < db || (da == db && a < b);
        });
    }

    // Blending.
    const std::size_t n_pix = static_cast<std::size_t>(out.width) * out.height;
    out.contrib_count.assign(n_pix, 0);
    out.final_transmittance.assign(n_pix, S(1));
    out.final_rgb.assign(n_pix * 3, S(0));
    out.tile_max_contrib.assign(tiles, 0);
    out.has_checkpoints = options.checkpointing;
    if (options.checkpointing) out.checkpoints.resize(tiles);

    const S alpha_min = S(options.alpha_min), alpha_max = S(options.alpha_max);
    const S t_min = S(options.min_transmittance);
    const int interval = options.checkpoint_interval;

#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (int t = 0; t < tiles; ++t) {
        const TileRect rect = tile_rect(t, out.tiles_x, options.tile_size, out.width, out.height);
        const std::uint32_t base = out.tile_ranges[t];
        const std::uint32_t n = out.tile_ranges[t + 1] - base;
        const std::size_t full_buckets = (n + interval - 1) / interval;

        thread_local std::vector<PixelState<S>> scratch;
        thread_local std::vector<int> reached;
        if (options.checkpointing) {
            scratch.resize(full_buckets * tile_px);
            reached.assign(tile_px, 0);
        }

        std::uint32_t max_count = 0;
        for (int y = rect.y0; y < rect.y1; ++y) {
            for (int x = rect.x0; x < rect.x1; ++x) {
                const int local = (y - rect.y0) * options.tile_size + (x - rect.x0);
                const S px = S(x) + S(0.5), py = S(y) + S(0.5);
                S trans = S(1);
                Vec3<S> acc = Vec3<S>::Zero();
                std::uint32_t count = 0;
                AlphaEval<S> e;
                for (std::uint32_t pos = 0; pos < n; ++pos) {
                    if (options.checkpointing && pos % interval == 0) {
                        scratch[(pos / interval) * tile_px + local] = {trans, acc};
                        reached[local] = static_cast<int>(pos / interval) + 1;
                    }
                    const Projected2D<S>& s = out.splats[out.tile_lists[base + pos]];
                    if (!evaluate_alpha(s, px, py, alpha_min, alpha_max, e)) continue;
                    for (int c = 0; c < 3; ++c) acc[c] = acc[c] + s.rgb[c] * e.alpha * trans;
                    trans = trans * (S(1) - e.alpha);
                    count = pos + 1;
                    if (trans < t_min) break;
                }
                const std::size_t pix = static_cast<std::size_t>(y) * out.width + x;
                out.contrib_count[pix] = count;
                out.final_transmittance[pix] = trans;
                for (int c = 0; c < 3; ++c) out.final_rgb[pix * 3 + c] = acc[c];
                max_count = std::max(max_count, count);
            }
        }
        out.tile_max_contrib[t] = max_count;

        if (options.checkpointing) {
            const std::size_t buckets = (max_count + interval - 1) / interval;
            auto& dst = out.checkpoints[t];
            dst.resize(buckets * tile_px);
            for (int local = 0; local < tile_px; ++local) {
                const int x = rect.x0 + local % options.tile_size;
                const int y = rect.y0 + local / options.tile_size;
                const bool inside = x < rect.x1 && y < rect.y1;
                PixelState<S> final_state{S(1), Vec3<S>::Zero()};
                if (inside) {
                    const std::size_t pix = static_cast<std::size_t>(y) * out.width + x;
                    final_state.transmittance = out.final_transmittance[pix];
                    final_state.accumulated_rgb = Vec3<S>(out.final_rgb[pix * 3], out.final_rgb[pix * 3 + 1],
                                                          out.final_rgb[pix * 3 + 2]);
                }
                for (std::size_t b = 0; b < buckets; ++b)
                    dst[b * tile_px + local] = inside && static_cast<int>(b) < reached[local]
                                                   ? scratch[b * tile_px + local]
                                                   : final_state;
            }
        }
    }

    out.image = Image(out.width, out.height);
    const Vec3<S> bg = options.background.cast<S>();
    for (std::size_t pix = 0; pix < n_pix; ++pix)
        for (int c = 0; c < 3; ++c)
            out.image.data[pix * 3 + c] =
                double(out.final_rgb[pix * 3 + c] + out.final_transmittance[pix] * bg[c]);
    return out;
}

// ---------------------------------------------------------------------------
// Pixel-wise backward
// ---------------------------------------------------------------------------

template <typename S>
ParamGrads backward_pixelwise(const RenderOutput<S>& render, const GaussianMap& map,
                              const Camera& camera, const Image& grad_image) {
    check_backward_inputs(render, map, camera, grad_image);
    const RasterOptions& options = render.options;
    const int workers = worker_count(options);
    const bool deterministic = options.reduction == ReductionMode::deterministic;
    const S alpha_min = S(options.alpha_min), alpha_max = S(options.alpha_max);
    const Vec3<S> bg = options.background.cast<S>();

    const std::vector<std::size_t> offsets = slot_offsets(render);
    std::vector<S> partial;
    std::vector<S> shared;
    if (deterministic)
        partial.assign(offsets.back() * kSlots, S(0));
    else
        shared.assign(render.splats.size() * kSlots, S(0));

#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (int t = 0; t < render.tile_count(); ++t) {
        if (render.tile_max_contrib[t] == 0) continue;
        const TileRect rect = tile_rect(t, render.tiles_x, options.tile_size, render.width, render.height);
        const std::uint32_t base = render.tile_ranges[t];
        for (int y = rect.y0; y < rect.y1; ++y) {
            for (int x = rect.x0; x < rect.x1; ++x) {
                const std::size_t pix = static_cast<std::size_t>(y) * render.width + x;
                const std::uint32_t count = render.contrib_count[pix];
                if (count == 0) continue;
                const Vec3<S> dl_dpix = pixel_grad<S>(grad_image, x, y);
                const S final_t = render.final_transmittance[pix];
                const S bg_dot = bg.dot(dl_dpix);
                const S px = S(x) + S(0.5), py = S(y) + S(0.5);

                S trans = final_t;
                Vec3<S> behind_unit = Vec3<S>::Zero();
                S last_alpha = S(0);
                Vec3<S> last_rgb = Vec3<S>::Zero();
                AlphaEval<S> e;
                for (std::uint32_t pos = count; pos-- > 0;) {
                    const std::uint32_t si = render.tile_lists[base + pos];
                    const Projected2D<S>& s = render.splats[si];
                    if (!evaluate_alpha(s, px, py, alpha_min, alpha_max, e)) continue;
                    const S one_minus = S(1) - e.alpha;
                    trans = trans / one_minus;
                    behind_unit = last_alpha * last_rgb + (S(1) - last_alpha) * behind_unit;
                    const Vec3<S> behind = trans * behind_unit;
                    ScreenGrad<S> term{};
                    add_pair_gradient(s, e, trans, behind, final_t / one_minus * bg_dot, dl_dpix,
                                      term.data());
                    if (deterministic) {
                        S* dst = &partial[(offsets[t] + pos) * kSlots];
                        for (int j = 0; j < kSlots; ++j) dst[j] += term[j];
                    } else {
                        S* dst = &shared[static_cast<std::size_t>(si) * kSlots];
                        for (int j = 0; j < kSlots; ++j)
                            std::atomic_ref<S>(dst[j]).fetch_add(term[j], std::memory_order_relaxed);
                    }
                    last_alpha = e.alpha;
                    last_rgb = s.rgb;
                }
            }
        }
    }

    std::vector<ScreenGrad<S>> screen;
    if (deterministic) {
        screen = merge_partials(render, offsets, partial, workers);
    } else {
        screen.resize(render.splats.size());
        for (std::size_t i = 0; i < screen.size(); ++i)
            std::copy_n(&shared[i * kSlots], kSlots, screen[i].begin());
    }
    return chain_to_parameters(render, map, camera, screen, workers);
}

// ---------------------------------------------------------------------------
// Splat-wise backward
// ---------------------------------------------------------------------------

template <typename S>
ParamGrads backward_splatwise(const RenderOutput<S>& render, const GaussianMap& map,
                              const Camera& camera, const Image& grad_image) {
    check_backward_inputs(render, map, camera, grad_image);
    if (!render.has_checkpoints)
        throw InvalidParameter(
            "splat-wise backward needs pixel-state checkpoints; re-run rasterize_forward with "
            "checkpointing enabled");
    const RasterOptions& options = render.options;
    const int workers = worker_count(options);
    const int interval = options.checkpoint_interval;
    const S alpha_min = S(options.alpha_min), alpha_max = S(options.alpha_max);
    const Vec3<S> bg = options.background.cast<S>();

    const std::vector<std::size_t> offsets = slot_offsets(render);
    std::vector<S> partial(offsets.back() * kSlots, S(0));

    // Work units are (tile, bucket) pairs.
    std::vector<std::size_t> unit_offsets(render.tile_count() + 1, 0);
    for (int t = 0; t < render.tile_count(); ++t)
        unit_offsets[t + 1] = unit_offsets[t] + render.bucket_count(t);
    const long long units = static_cast<long long>(unit_offsets.back());

#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (long long u = 0; u < units; ++u) {
        const int t = static_cast<int>(
            std::upper_bound(unit_offsets.begin(), unit_offsets.end(), static_cast<std::size_t>(u)) -
            unit_offsets.begin() - 1);
        const int bucket = static_cast<int>(u - unit_offsets[t]);
        const std::uint32_t begin = static_cast<std::uint32_t>(bucket) * interval;
        const std::uint32_t end = std::min<std::uint32_t>(begin + interval, render.tile_max_contrib[t]);
        const std::uint32_t base = render.tile_ranges[t];
        const TileRect rect = tile_rect(t, render.tiles_x, options.tile_size, render.width, render.height);

        thread_local std::vector<ScreenGrad<S>> local;
        local.assign(end - begin, ScreenGrad<S>{});

        for (int y = rect.y0; y < rect.y1; ++y) {
            for (int x = rect.x0; x < rect.x1; ++x) {
                const std::size_t pix = static_cast<std::size_t>(y) * render.width + x;
                const std::uint32_t count = render.contrib_count[pix];
                if (count <= begin) continue;
                const int lp = (y - rect.y0) * options.tile_size + (x - rect.x0);
                const PixelState<S>& state = render.checkpoint(t, bucket, lp);
                S trans = state.transmittance;
                Vec3<S> acc = state.accumulated_rgb;
                const Vec3<S> fg(render.final_rgb[pix * 3], render.final_rgb[pix * 3 + 1],
                                 render.final_rgb[pix * 3 + 2]);
                const S final_t = render.final_transmittance[pix];
                const Vec3<S> dl_dpix = pixel_grad<S>(grad_image, x, y);
                const S bg_dot = bg.dot(dl_dpix);
                const S px = S(x) + S(0.5), py = S(y) + S(0.5);
                const std::uint32_t stop = std::min(end, count);
                AlphaEval<S> e;
                for (std::uint32_t pos = begin; pos < stop; ++pos) {
                    const Projected2D<S>& s = render.splats[render.tile_lists[base + pos]];
                    if (!evaluate_alpha(s, px, py, alpha_min, alpha_max, e)) continue;
                    const S one_minus = S(1) - e.alpha;
                    Vec3<S> acc_incl;
                    for (int c = 0; c < 3; ++c) acc_incl[c] = acc[c] + s.rgb[c] * e.alpha * trans;
                    const Vec3<S> behind = (fg - acc_incl) / one_minus;
                    add_pair_gradient(s, e, trans, behind, final_t / one_minus * bg_dot, dl_dpix,
                                      local[pos - begin].data());
                    acc = acc_incl;
                    trans = trans * one_minus;
                }
            }
        }
        for (std::uint32_t pos = begin; pos < end; ++pos)
            std::copy(local[pos - begin].begin(), local[pos - begin].end(),
                      &partial[(offsets[t] + pos) * kSlots]);
    }

    const auto screen = merge_partials(render, offsets, partial, workers);
    return chain_to_parameters(render, map, camera, screen, workers);
}

// ---------------------------------------------------------------------------
// Inspection helpers
// ---------------------------------------------------------------------------

template <typename S>
Vec3<S> replay_pixel(const RenderOutput<S>& render, int x, int y, int bucket) {
    if (!render.has_checkpoints) throw InvalidParameter("render has no checkpoints");
    if (x < 0 || y < 0 || x >= render.width || y >= render.height)
        throw InvalidParameter("pixel outside the image");
    const int ts = render.options.tile_size;
    const int t = (y / ts) * render.tiles_x + x / ts;
    if (bucket < 0 || bucket >= std::max(render.bucket_count(t), 1))
        throw InvalidParameter("bucket out of range");
    const std::size_t pix = static_cast<std::size_t>(y) * render.width + x;
    const Vec3<S> bg = render.options.background.template cast<S>();
    if (render.bucket_count(t) == 0) return bg;
    const int lp = (y % ts) * ts + (x % ts);
    const PixelState<S>& state = render.checkpoint(t, bucket, lp);
    S trans = state.transmittance;
    Vec3<S> acc = state.accumulated_rgb;
    const S alpha_min = S(render.options.alpha_min), alpha_max = S(render.options.alpha_max);
    const S px = S(x) + S(0.5), py = S(y) + S(0.5);
    const std::uint32_t base = render.tile_ranges[t];
    AlphaEval<S> e;
    for (std::uint32_t pos = static_cast<std::uint32_t>(bucket) * render.options.checkpoint_interval;
         pos < render.contrib_count[pix]; ++pos) {
        const Projected2D<S>& s = render.splats[render.tile_lists[base + pos]];
        if (!evaluate_alpha(s, px, py, alpha_min, alpha_max, e)) continue;
        for (int c = 0; c < 3; ++c) acc[c] = acc[c] + s.rgb[c] * e.alpha * trans;
        trans = trans * (S(1) - e.alpha);
    }
    return acc + trans * bg;
}

template <typename S>
std::vector<BlendRecord> trace_pixel(const RenderOutput<S>& render, int x, int y) {
    if (x < 0 || y < 0 || x >= render.width || y >= render.height)
        throw InvalidParameter("pixel outside the image");
    const int ts = render.options.tile_size;
    const int t = (y / ts) * render.tiles_x + x / ts;
    const std::size_t pix = static_cast<std::size_t>(y) * render.width + x;
    const S alpha_min = S(render.options.alpha_min), alpha_max = S(render.options.alpha_max);
    const S px = S(x) + S(0.5), py = S(y) + S(0.5);
    std::vector<BlendRecord> out;
    S trans = S(1);
    AlphaEval<S> e;
    for (std::uint32_t pos = 0; pos < render.contrib_count[pix]; ++pos) {
        const Projected2D<S>& s = render.splats[render.tile_lists[render.tile_ranges[t] + pos]];
        if (!evaluate_alpha(s, px, py, alpha_min, alpha_max, e)) continue;
        out.push_back({s.primitive_index, double(e.alpha), double(trans)});
        trans = trans * (S(1) - e.alpha);
    }
    return out;
}

// ---------------------------------------------------------------------------
// ParamGrads
// ---------------------------------------------------------------------------

bool ParamGrads::all_finite() const {
    for (const auto& g : primitives) {
        if (!g.position.allFinite() || !g.rotation.allFinite() || !g.log_scale.allFinite() ||
            !std::isfinite(g.opacity_logit))
            return false;
        for (double v : g.sh)
            if (!std::isfinite(v)) return false;
    }
    return true;
}

std::vector<double> ParamGrads::flatten() const {
    std::vector<double> out;
    out.reserve(primitives.size() * kParamsPerPrimitive);
    for (const auto& g : primitives) {
        out.insert(out.end(), g.position.data(), g.position.data() + 3);
        out.insert(out.end(), g.rotation.data(), g.rotation.data() + 4);
        out.insert(out.end(), g.log_scale.data(), g.log_scale.data() + 3);
        out.push_back(g.opacity_logit);
        out.insert(out.end(), g.sh.begin(), g.sh.end());
    }
    return out;
}

double max_relative_difference(const ParamGrads& candidate, const ParamGrads& reference) {
    if (candidate.size() != reference.size())
        throw InvalidParameter("max_relative_difference: gradient sets differ in length");
    const std::vector<double> a = candidate.flatten();
    const std::vector<double> b = reference.flatten();
    // Block boundaries within one primitive's flattened parameters.
    constexpr int bounds[] = {0, 3, 7, 10, 11, kParamsPerPrimitive};
    double scale[5] = {}, diff[5] = {};
    for (int blk = 0; blk < 5; ++blk) {
        for (std::size_t i = 0; i < reference.size(); ++i) {
            for (int j = bounds[blk]; j < bounds[blk + 1]; ++j) {
                const std::size_t k = i * kParamsPerPrimitive + j;
                scale[blk] = std::max(scale[blk], std::abs(b[k]));
                diff[blk] = std::max(diff[blk], std::abs(a[k] - b[k]));
            }
        }
    }
    // A block that is analytically zero (rotation of isotropic splats) holds only round-off,
    // so its scale is floored at a small fraction of the largest block.
    const double floor = kRelativeDifferenceFloor * *std::max_element(scale, scale + 5);
    double worst = 0.0;
    for (int blk = 0; blk < 5; ++blk) {
        const double s = std::max(scale[blk], floor);
        worst = std::max(worst, s > 0.0 ? diff[blk] / s : diff[blk]);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Explicit instantiations
// ---------------------------------------------------------------------------

#define GSALIGN_INSTANTIATE(S)                                                                   \
    template struct RenderOutput<S>;                                                             \
    template std::optional<Projected2D<S>> project_gaussian<S>(const GaussianPrimitive&,         \
                                                               const Camera&, const RasterOptions&); \
    template RenderOutput<S> rasterize_forward<S>(const GaussianMap&, const Camera&,             \
                                                  const RasterOptions&);                         \
    template ParamGrads backward_pixelwise<S>(const RenderOutput<S>&, const GaussianMap&,        \
                                              const Camera&, const Image&);                      \
    template ParamGrads backward_splatwise<S>(const RenderOutput<S>&, const GaussianMap&,        \
                                              const Camera&, const Image&);                      \
    template Vec3<S> replay_pixel<S>(const RenderOutput<S>&, int, int, int);                     \
    template std::vector<BlendRecord> trace_pixel<S>(const RenderOutput<S>&, int, int);

GSALIGN_INSTANTIATE(float)
GSALIGN_INSTANTIATE(double)

#undef GSALIGN_INSTANTIATE

}  // namespace gsalign
