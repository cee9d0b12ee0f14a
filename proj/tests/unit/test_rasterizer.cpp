#include "gsalign/error.hpp"
#include "gsalign/rasterizer.hpp"
#include "gsalign/spherical_harmonics.hpp"

#include "gradcheck.hpp"
#include "scenes.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace gsalign;
using testing_support::random_scene;
using testing_support::SceneSpec;

namespace {

constexpr double kC0 = sh_constants::kC0;

GaussianPrimitive splat(Eigen::Vector3f position, double sigma, double opacity_logit,
                        Eigen::Vector3d rgb) {
    GaussianPrimitive p;
    p.position = position;
    p.log_scale = Eigen::Vector3f::Constant(float(std::log(sigma)));
    p.opacity_logit = float(opacity_logit);
    for (int c = 0; c < 3; ++c) p.sh[c] = float((rgb[c] - 0.5) / kC0);
    return p;
}

Camera square_camera(int size, double f, double c) {
    Camera cam;
    cam.width = cam.height = size;
    cam.fx = cam.fy = f;
    cam.cx = cam.cy = c;
    return cam;
}

Vec3<double> pixel(const Image& img, int x, int y) {
    return {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)};
}

}  // namespace

TEST_CASE("project_gaussian: on-axis examples") {
    const Camera cam = square_camera(128, 100, 64);
    GaussianPrimitive p;
    p.position = Eigen::Vector3f(0, 0, 10);
    const auto proj = project_gaussian<double>(p, cam);
    REQUIRE(proj.has_value());
    CHECK(proj->mean2d[0] == doctest::Approx(64.0));
    CHECK(proj->mean2d[1] == doctest::Approx(64.0));
    CHECK(proj->cov2d(0, 0) == doctest::Approx(100.3).epsilon(1e-12));
    CHECK(proj->cov2d(1, 1) == doctest::Approx(100.3).epsilon(1e-12));
    CHECK(std::abs(proj->cov2d(0, 1)) < 1e-12);
    CHECK(proj->depth == doctest::Approx(10.0));

    p.position.z() = -1.0f;
    CHECK_FALSE(project_gaussian<double>(p, cam).has_value());
    p.position = Eigen::Vector3f(1000, 0, 10);
    p.log_scale.setConstant(-3.0f);
    CHECK_FALSE(project_gaussian<double>(p, cam).has_value());
}

TEST_CASE("rasterize_forward: empty map renders the background") {
    const Camera cam = square_camera(20, 20, 10);
    RasterOptions opts;
    const auto out = rasterize_forward<double>(GaussianMap{}, cam, opts);
    for (double v : out.image.data) CHECK(v == 0.0);
    for (double t : out.final_transmittance) CHECK(t == 1.0);

    opts.background = Eigen::Vector3d(0.1, 0.2, 0.3);
    const auto bg = rasterize_forward<double>(GaussianMap{}, cam, opts);
    CHECK(pixel(bg.image, 7, 3).isApprox(opts.background));
}

TEST_CASE("rasterize_forward: a single fully opaque splat") {
    // Pixel (4, 4) has its center exactly under the splat mean.
    const Camera cam = square_camera(9, 9, 4.5);
    GaussianMap map({splat({0, 0, 3}, 0.05, 40.0, {0.2, 0.4, 0.6})});
    RasterOptions opts;
    opts.alpha_max = 1.0;
    const auto out = rasterize_forward<double>(map, cam, opts);
    CHECK((pixel(out.image, 4, 4) - Vec3<double>(0.2, 0.4, 0.6)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(out.final_transmittance[4 * 9 + 4] == 0.0);
}

TEST_CASE("rasterize_forward: two half-transparent splats") {
    const Camera cam = square_camera(9, 9, 4.5);
    GaussianMap map({splat({0, 0, 4}, 0.05, 0.0, {0, 1, 0}), splat({0, 0, 2}, 0.05, 0.0, {1, 0, 0})});
    const auto out = rasterize_forward<double>(map, cam);
    CHECK((pixel(out.image, 4, 4) - Vec3<double>(0.5, 0.25, 0.0)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(out.final_transmittance[4 * 9 + 4] == doctest::Approx(0.25).epsilon(1e-12));
    const auto trace = trace_pixel(out, 4, 4);
    REQUIRE(trace.size() == 2);
    CHECK(trace[0].primitive_index == 1);
    CHECK(trace[1].primitive_index == 0);
}

TEST_CASE("rasterize_forward: equal depths blend in ascending primitive index") {
    const Camera cam = square_camera(9, 9, 4.5);
    const auto red = splat({0, 0, 2}, 0.05, 0.0, {1, 0, 0});
    const auto blue = splat({0, 0, 2}, 0.05, 0.0, {0, 0, 1});
    const auto rb = rasterize_forward<double>(GaussianMap({red, blue}), cam);
    const auto br = rasterize_forward<double>(GaussianMap({blue, red}), cam);
    CHECK((pixel(rb.image, 4, 4) - Vec3<double>(0.5, 0.0, 0.25)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((pixel(br.image, 4, 4) - Vec3<double>(0.25, 0.0, 0.5)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("rasterize_forward: non-finite primitive is reported by index") {
    auto scene = random_scene(1);
    scene.map[3].opacity_logit = std::numeric_limits<float>::infinity();
    try {
        rasterize_forward<double>(scene.map, scene.camera);
        FAIL("expected an error");
    } catch (const InvalidParameter& e) {
        CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
}

TEST_CASE("rasterize_forward: blend weights and final transmittance sum to one") {
    SceneSpec spec;
    spec.min_splats = 20;
    spec.max_splats = 60;
    spec.max_opacity = 0.9;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto scene = random_scene(seed, spec);
        const auto out = rasterize_forward<double>(scene.map, scene.camera);
        double worst = 0.0;
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x) {
                double sum = out.final_transmittance[std::size_t(y) * out.width + x];
                for (const auto& r : trace_pixel(out, x, y)) sum += r.alpha * r.transmittance;
                worst = std::max(worst, std::abs(sum - 1.0));
            }
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("replay from every checkpoint reproduces the final pixel") {
    SceneSpec spec;
    spec.min_splats = 60;
    spec.max_splats = 120;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto scene = random_scene(seed, spec);
        const auto out = rasterize_forward<double>(scene.map, scene.camera);
        const int ts = out.options.tile_size;
        double worst = 0.0, first = 0.0;
        int max_buckets = 0;
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x) {
                const int tile = (y / ts) * out.tiles_x + x / ts;
                const int buckets = out.bucket_count(tile);
                max_buckets = std::max(max_buckets, buckets);
                for (int b = 0; b < buckets; ++b) {
                    const double d = (replay_pixel(out, x, y, b) - pixel(out.image, x, y)).cwiseAbs().maxCoeff();
                    worst = std::max(worst, d);
                    if (b == 0) first = std::max(first, d);
                }
            }
        CHECK(max_buckets >= 2);
        CHECK(worst <= 1e-6);
        CHECK(first <= 1e-12);
    }
}

TEST_CASE("rendering is bit-identical across runs") {
    SceneSpec spec;
    spec.min_splats = 100;
    spec.max_splats = 200;
    const auto scene = random_scene(5, spec);
    RasterOptions opts;
    opts.num_threads = 4;
    const Image g = testing_support::random_image(32, 32, 9, -1, 1);
    const auto a = rasterize_forward<float>(scene.map, scene.camera, opts);
    const auto b = rasterize_forward<float>(scene.map, scene.camera, opts);
    CHECK(a.image.data == b.image.data);
    for (auto mode : {BackwardMode::pixel, BackwardMode::splat})
        CHECK(backward(mode, a, scene.map, scene.camera, g).flatten() ==
              backward(mode, b, scene.map, scene.camera, g).flatten());
}

TEST_CASE("backward: zero image gradient gives zero parameter gradients") {
    const auto scene = random_scene(2);
    const auto out = rasterize_forward<double>(scene.map, scene.camera);
    const Image zero(32, 32);
    for (auto mode : {BackwardMode::pixel, BackwardMode::splat}) {
        const auto g = backward(mode, out, scene.map, scene.camera, zero);
        CHECK(g.size() == scene.map.size());
        for (double v : g.flatten()) CHECK(v == 0.0);
    }
}

TEST_CASE("backward: centered opaque splat") {
    // Footprint symmetric about the image center, degree-0 color.
    const Camera cam = square_camera(16, 16, 8);
    GaussianMap map({splat({0, 0, 3}, 0.4, 5.0, {0.3, 0.5, 0.7})});
    const auto out = rasterize_forward<double>(map, cam);
    const Image ones(16, 16, 1.0);

    double weight = 0.0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (const auto& r : trace_pixel(out, x, y)) weight += r.alpha * r.transmittance;
    REQUIRE(weight > 1.0);

    for (auto mode : {BackwardMode::pixel, BackwardMode::splat}) {
        const auto g = backward(mode, out, map, cam, ones);
        for (int c = 0; c < 3; ++c) CHECK(g.primitives[0].sh[c] == doctest::Approx(kC0 * weight).epsilon(1e-12));
        CHECK(std::abs(g.primitives[0].position.x()) < 1e-12);
        CHECK(std::abs(g.primitives[0].position.y()) < 1e-12);
    }
}

TEST_CASE("backward: errors") {
    const auto scene = random_scene(4);
    const auto out = rasterize_forward<double>(scene.map, scene.camera);
    CHECK_THROWS_AS(backward_pixelwise(out, scene.map, scene.camera, Image(31, 32)), InvalidParameter);
    CHECK_THROWS_AS(backward_splatwise(out, scene.map, scene.camera, Image(32, 31)), InvalidParameter);

    RasterOptions no_ckpt;
    no_ckpt.checkpointing = false;
    const auto bare = rasterize_forward<double>(scene.map, scene.camera, no_ckpt);
    try {
        backward_splatwise(bare, scene.map, scene.camera, Image(32, 32));
        FAIL("expected an error");
    } catch (const InvalidParameter& e) {
        CHECK(std::string(e.what()).find("checkpointing") != std::string::npos);
    }
    CHECK_NOTHROW(backward_pixelwise(bare, scene.map, scene.camera, Image(32, 32)));

    RasterOptions opaque;
    opaque.alpha_max = 1.0;
    const auto o = rasterize_forward<double>(scene.map, scene.camera, opaque);
    CHECK_THROWS_AS(backward_pixelwise(o, scene.map, scene.camera, Image(32, 32)), InvalidParameter);
}

TEST_CASE("backward: splats behind a saturated pixel receive no gradient") {
    const Camera cam = square_camera(9, 9, 4.5);
    std::vector<GaussianPrimitive> prims;
    for (int i = 0; i < 4; ++i) prims.push_back(splat({0, 0, 1.0f + 0.1f * i}, 3.0, 8.0, {0.5, 0.5, 0.5}));
    prims.push_back(splat({0, 0, 3}, 1.0, 0.0, {1, 0, 0}));
    GaussianMap map(prims);
    const auto out = rasterize_forward<double>(map, cam);
    const Image ones(9, 9, 1.0);
    for (auto mode : {BackwardMode::pixel, BackwardMode::splat}) {
        const auto g = backward(mode, out, map, cam, ones);
        CHECK(g.contributions[4] == 0);
        for (double v : g.primitives[4].sh) CHECK(v == 0.0);
        CHECK(g.primitives[4].opacity_logit == 0.0);
        CHECK(g.primitives[0].opacity_logit != 0.0);
    }
}

TEST_CASE("backward: 33 splats on one tile, two buckets equal one") {
    const Camera cam = square_camera(16, 16, 8);
    std::vector<GaussianPrimitive> prims;
    for (int i = 0; i < 33; ++i) {
        auto p = splat({0.02f * float(i % 5 - 2), 0.02f * float(i % 3 - 1), 2.0f + 0.03f * i}, 0.5,
                       logit(0.05), {0.1 + 0.02 * i, 0.5, 0.9 - 0.02 * i});
        p.rotation = Eigen::Vector4f(1.0f, 0.1f * float(i % 4), 0.0f, 0.05f * float(i % 7));
        prims.push_back(p);
    }
    GaussianMap map(prims);
    const Image g = testing_support::random_image(16, 16, 3, -1, 1);

    RasterOptions b32, b64;
    b64.checkpoint_interval = 64;
    const auto r32 = rasterize_forward<double>(map, cam, b32);
    const auto r64 = rasterize_forward<double>(map, cam, b64);
    CHECK(r32.bucket_count(0) == 2);
    CHECK(r64.bucket_count(0) == 1);
    const auto two = backward_splatwise(r32, map, cam, g);
    const auto one = backward_splatwise(r64, map, cam, g);
    CHECK(max_relative_difference(two, one) <= 1e-12);
    CHECK(max_relative_difference(two, backward_pixelwise(r32, map, cam, g)) <= 1e-12);
}

TEST_CASE("backward: splat-wise equals pixel-wise") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const auto d = testing_support::dense_scene(seed);
        for (auto reduction : {ReductionMode::deterministic, ReductionMode::parallel}) {
            RasterOptions opts;
            opts.background = d.background;
            opts.reduction = reduction;
            opts.num_threads = 4;
            const auto& s = d.scene;
            const auto rf = rasterize_forward<float>(s.map, s.camera, opts);
            CHECK(max_relative_difference(backward_splatwise(rf, s.map, s.camera, d.grad_image),
                                          backward_pixelwise(rf, s.map, s.camera, d.grad_image)) <= 1e-5);
            const auto rd = rasterize_forward<double>(s.map, s.camera, opts);
            CHECK(max_relative_difference(backward_splatwise(rd, s.map, s.camera, d.grad_image),
                                          backward_pixelwise(rd, s.map, s.camera, d.grad_image)) <= 1e-12);
        }
    }
}

TEST_CASE("backward: 8 splats on 16x16 match finite differences") {
    SceneSpec spec;
    spec.min_splats = spec.max_splats = 8;
    spec.width = spec.height = 16;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto scene = random_scene(seed, spec);
        for (auto mode : {BackwardMode::pixel, BackwardMode::splat}) {
            const auto r = testing_support::check_gradients(scene, mode, RasterOptions{}, seed + 100);
            INFO(r.first_failure);
            CHECK(r.checked > 100);
            CHECK(r.failures == 0);
        }
    }
}

TEST_CASE("max_relative_difference: normalizes per block") {
    ParamGrads a(2), b(2);
    a.primitives[0].position = Eigen::Vector3d(100, 0, 0);
    b.primitives[0].position = Eigen::Vector3d(100, 1, 0);
    CHECK(max_relative_difference(a, b) == doctest::Approx(0.01));
    b.primitives[1].sh[5] = 1.0;
    CHECK(max_relative_difference(a, b) == doctest::Approx(1.0));
    // A block far below the largest one is measured against the floor, not its own round-off.
    b.primitives[1].sh[5] = 1e-3;
    CHECK(max_relative_difference(a, b) == doctest::Approx(1e-3 / (kRelativeDifferenceFloor * 100)));
    CHECK(max_relative_difference(a, a) == 0.0);
    CHECK_THROWS_AS(max_relative_difference(a, ParamGrads(3)), InvalidParameter);
}
