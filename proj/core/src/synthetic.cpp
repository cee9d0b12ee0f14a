#include "gsalign/synthetic.hpp"
#include "gsalign/error.hpp"
#include "gsalign/image_io.hpp"
#include "gsalign/ply.hpp"
#include "gsalign/rasterizer.hpp"
#include "gsalign/spherical_harmonics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

namespace gsalign {

namespace fs = std::filesystem;

void SyntheticOptions::validate() const {
    if (n_gaussians < 1) throw InvalidParameter("n_gaussians must be >= 1");
    if (n_frames < 1) throw InvalidParameter("n_frames must be >= 1");
    if (image_size < 1) throw InvalidParameter("image_size must be >= 1");
    if (points_per_frame < 0) throw InvalidParameter("points_per_frame must be >= 0");
    if (!(point_noise >= 0.0)) throw InvalidParameter("point_noise must be >= 0");
    if (!(orbit_radius > 1.0)) throw InvalidParameter("orbit_radius must be > 1");
    if (!(frame_period > 0.0)) throw InvalidParameter("frame_period must be > 0");
    if (!(image_jitter >= 0.0 && 2.0 * image_jitter < frame_period))
        throw InvalidParameter("image_jitter must be in [0, frame_period / 2)");
}

namespace {

std::string pose_line(const TrajectoryEntry& e) {
    const auto& q = e.rotation;
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s %.17g %.17g %.17g %.17g %.17g %.17g %.17g",
                  timestamp_stem(e.timestamp).c_str(), e.position.x(), e.position.y(),
                  e.position.z(), q.x(), q.y(), q.z(), q.w());
    return buf;
}

}  // namespace

SyntheticScene generate_synthetic(const SyntheticOptions& options) {
    options.validate();
    SyntheticScene scene;
    scene.options = options;
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<GaussianPrimitive> prims(options.n_gaussians);
    const double log_lo = std::log(0.02), log_hi = std::log(0.07);
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (auto& p : prims) {
        for (int i = 0; i < 3; ++i) p.position[i] = static_cast<float>(unit(rng) - 0.5);
        Eigen::Vector4d q;
        do {
            for (int i = 0; i < 4; ++i) q[i] = normal(rng);
        } while (q.norm() < 1e-6);
        p.rotation = (q / q.norm()).cast<float>();
        for (int i = 0; i < 3; ++i)
            p.log_scale[i] = static_cast<float>(log_lo + (log_hi - log_lo) * unit(rng));
        p.opacity_logit = static_cast<float>(logit(0.6 + 0.35 * unit(rng)));
        for (int c = 0; c < 3; ++c)
            p.sh[c] = static_cast<float>((0.1 + 0.8 * unit(rng) - 0.5) / sh_constants::kC0);
        centroid += p.position.cast<double>();
    }
    centroid /= double(prims.size());
    scene.ground_truth = GaussianMap(std::move(prims));

    const int size = options.image_size;
    scene.intrinsics = {double(size), double(size), size / 2.0, size / 2.0, size, size};

    RasterOptions raster;
    raster.checkpointing = false;
    const Eigen::Vector3d up(0.0, 0.0, 1.0);
    for (int i = 0; i < options.n_frames; ++i) {
        const double theta = 2.0 * std::numbers::pi * i / options.n_frames;
        const double phi = 0.35 + 0.15 * std::sin(2.0 * theta);
        const Eigen::Vector3d position =
            centroid + options.orbit_radius * Eigen::Vector3d(std::cos(theta) * std::cos(phi),
                                                              std::sin(theta) * std::cos(phi),
                                                              std::sin(phi));
        const Eigen::Vector3d forward = (centroid - position).normalized();
        const Eigen::Vector3d right = forward.cross(up).normalized();
        const Eigen::Vector3d down = forward.cross(right);
        Eigen::Matrix3d c2w;
        c2w << right, down, forward;

        TrajectoryEntry raw;
        raw.timestamp = i * options.frame_period;
        raw.position = position;
        raw.rotation = Eigen::Quaterniond(c2w).normalized();
        // Round-trip through the text form so the camera matches what the loader builds.
        const TrajectoryEntry pose = parse_trajectory_line(pose_line(raw), 1);
        scene.trajectory.push_back(pose);
        const double jitter = options.image_jitter * (2.0 * unit(rng) - 1.0);
        scene.image_timestamps.push_back(std::stod(timestamp_stem(pose.timestamp + jitter)));

        const Camera cam = camera_from_pose(scene.intrinsics, pose);
        scene.cameras.push_back(cam);
        auto render = rasterize_forward<double>(scene.ground_truth, cam, raster);
        scene.images.push_back(std::move(render.image));

        std::vector<std::size_t> visible;
        for (const auto& s : render.splats) visible.push_back(s.primitive_index);
        std::vector<ColoredPoint> pts;
        for (int k = 0; k < options.points_per_frame && !visible.empty(); ++k) {
            const auto& gt = scene.ground_truth[visible[rng() % visible.size()]];
            ColoredPoint p;
            for (int a = 0; a < 3; ++a)
                p.position[a] = gt.position[a] + options.point_noise * normal(rng);
            for (int c = 0; c < 3; ++c)
                p.color[c] = std::clamp(0.5 + sh_constants::kC0 * gt.sh[c], 0.0, 1.0);
            pts.push_back(p);
        }
        scene.points.push_back(std::move(pts));
    }
    return scene;
}

void write_synthetic(const SyntheticScene& scene, const fs::path& root) {
    std::error_code ec;
    fs::create_directories(root / "images", ec);
    if (!ec) fs::create_directories(root / "points", ec);
    if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());

    auto open = [](const fs::path& p) {
        std::ofstream out(p);
        if (!out) throw IoError("cannot write " + p.string());
        return out;
    };
    {
        auto out = open(root / "intrinsics.txt");
        const auto& k = scene.intrinsics;
        out << "# fx fy cx cy width height\n";
        char buf[256];
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %d %d\n", k.fx, k.fy, k.cx, k.cy,
                      k.width, k.height);
        out << buf;
    }
    {
        auto out = open(root / "trajectory.txt");
        out << "# timestamp tx ty tz qx qy qz qw (camera-to-world)\n";
        for (const auto& e : scene.trajectory) out << pose_line(e) << "\n";
    }
    for (std::size_t i = 0; i < scene.images.size(); ++i) {
        const std::string stem = timestamp_stem(scene.image_timestamps[i]);
        write_ppm(root / "images" / (stem + ".ppm"), scene.images[i], 16);
        auto out = open(root / "points" / (stem + ".txt"));
        char buf[256];
        for (const auto& p : scene.points[i]) {
            std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g %.17g\n", p.position.x(),
                          p.position.y(), p.position.z(), p.color.x(), p.color.y(), p.color.z());
            out << buf;
        }
    }
    save_map(root / "gt_map.ply", scene.ground_truth);
    const auto& o = scene.options;
    auto out = open(root / "generator.txt");
    out << "gaussians=" << o.n_gaussians << "\nframes=" << o.n_frames << "\nsize=" << o.image_size
        << "\nseed=" << o.seed << "\n";
}

SyntheticScene gen_synthetic(const SyntheticOptions& options, const fs::path& root) {
    auto scene = generate_synthetic(options);
    write_synthetic(scene, root);
    return scene;
}

}  // namespace gsalign
