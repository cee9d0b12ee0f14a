#pragma once

#include "gsalign/gaussian_map.hpp"
#include "gsalign/types.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

namespace testing_support {

struct SceneSpec {
    int min_splats = 4;
    int max_splats = 16;
    int width = 32;
    int height = 32;
    double min_opacity = 0.1;
    double max_opacity = 0.3;
    /// Footprint standard deviation range as a fraction of depth.
    double min_extent = 0.1 / 8.0;
    double max_extent = 0.35 / 8.0;
    /// Lateral spread of centers as a fraction of depth.
    double spread = 0.4;
    double sh_rest = 0.3;
};

struct Scene {
    gsalign::GaussianMap map;
    gsalign::Camera camera;
};

/// Random primitives in front of an identity camera with focal length = width.
inline Scene random_scene(std::uint64_t seed, const SceneSpec& spec = {}) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = spec.min_splats + int(rng() % std::uint64_t(spec.max_splats - spec.min_splats + 1));
    std::vector<gsalign::GaussianPrimitive> prims(n);
    for (auto& p : prims) {
        const double z = 2.5 + 1.5 * u(rng);
        p.position = Eigen::Vector3f(float((u(rng) - 0.5) * spec.spread * z),
                                     float((u(rng) - 0.5) * spec.spread * z), float(z));
        for (int a = 0; a < 3; ++a)
            p.log_scale[a] = float(std::log((spec.min_extent + (spec.max_extent - spec.min_extent) * u(rng)) * z));
        p.rotation = Eigen::Vector4f(float(0.5 + u(rng)), float(u(rng) - 0.5), float(u(rng) - 0.5),
                                     float(u(rng) - 0.5));
        p.opacity_logit =
            float(gsalign::logit(spec.min_opacity + (spec.max_opacity - spec.min_opacity) * u(rng)));
        for (int k = 3; k < gsalign::kShCoeffCount; ++k) p.sh[k] = float((u(rng) - 0.5) * spec.sh_rest);
        for (int c = 0; c < 3; ++c) p.sh[c] = float(0.3 + 0.6 * u(rng));
    }
    Scene s;
    s.map = gsalign::GaussianMap(std::move(prims));
    s.camera.fx = s.camera.fy = spec.width;
    s.camera.cx = spec.width / 2.0;
    s.camera.cy = spec.height / 2.0;
    s.camera.width = spec.width;
    s.camera.height = spec.height;
    return s;
}

/// Uniform values in [-scale, scale] shaped like an image.
inline gsalign::Image random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    gsalign::Image img(w, h);
    for (double& v : img.data) v = u(rng);
    return img;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("gsalign_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

/// Whole-file contents.
std::string read_file(const std::filesystem::path& p);

}  // namespace testing_support
