#include "gradcheck.hpp"

#include "reference_renderer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace testing_support {

using namespace gsalign;

GradCheck check_gradients(const Scene& scene, BackwardMode mode, const RasterOptions& options,
                          std::uint64_t weight_seed, double eps, double tolerance, double floor) {
    const Camera& cam = scene.camera;
    const Image weights = random_image(cam.width, cam.height, weight_seed, -1.0, 1.0);
    const auto render = rasterize_forward<double>(scene.map, cam, options);
    const std::vector<double> analytic =
        backward(mode, render, scene.map, cam, weights).flatten();
    const auto fd = oracle::finite_differences(oracle::to_params(scene.map), cam, options,
                                               weights.data, oracle::Real(eps));
    GradCheck out;
    for (const auto& e : fd) {
        const double a = analytic[e.primitive * kParamsPerPrimitive + e.parameter];
        if (std::abs(a) <= floor) continue;
        if (!e.smooth) {
            ++out.nonsmooth;
            continue;
        }
        ++out.checked;
        const double f = double(e.value);
        const double rel = std::abs(a - f) / std::max(std::abs(a), std::abs(f));
        out.worst = std::max(out.worst, rel);
        if (rel > tolerance) {
            if (out.failures == 0) {
                std::ostringstream ss;
                ss << "primitive " << e.primitive << " parameter " << e.parameter << ": analytic "
                   << a << " vs fd " << f;
                out.first_failure = ss.str();
            }
            ++out.failures;
        }
    }
    return out;
}

DenseScene dense_scene(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 20 + int(rng() % 300);
    const int w = 48 + int(rng() % 40), h = 40 + int(rng() % 40);
    std::vector<GaussianPrimitive> prims(n);
    for (auto& p : prims) {
        const double z = 2.0 + 3.0 * u(rng);
        p.position = Eigen::Vector3f(float((u(rng) - 0.5) * z), float((u(rng) - 0.5) * z), float(z));
        for (int a = 0; a < 3; ++a) p.log_scale[a] = float(std::log((0.01 + 0.1 * u(rng)) * z));
        p.rotation = Eigen::Vector4f(float(u(rng) - 0.5), float(u(rng) - 0.5), float(u(rng) - 0.5),
                                     float(u(rng) - 0.5));
        p.opacity_logit = float(logit(0.05 + 0.94 * u(rng)));
        for (int k = 0; k < kShCoeffCount; ++k) p.sh[k] = float((u(rng) - 0.5) * (k < 3 ? 2.0 : 0.4));
    }
    DenseScene d;
    d.scene.map = GaussianMap(std::move(prims));
    d.scene.camera.fx = d.scene.camera.fy = w;
    d.scene.camera.cx = w / 2.0;
    d.scene.camera.cy = h / 2.0;
    d.scene.camera.width = w;
    d.scene.camera.height = h;
    d.background = Eigen::Vector3d(u(rng), u(rng), u(rng));
    d.grad_image = Image(w, h);
    for (double& v : d.grad_image.data) v = (u(rng) * 2.0 - 1.0) / double(d.grad_image.data.size());
    return d;
}

}  // namespace testing_support
