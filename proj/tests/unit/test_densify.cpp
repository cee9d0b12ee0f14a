#include "gsalign/densify.hpp"
#include "gsalign/error.hpp"
#include "gsalign/geometry.hpp"
#include "gsalign/spherical_harmonics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace gsalign;

namespace {

ColoredPoint point(double x, double y, double z, double grey = 0.5) {
    return {Eigen::Vector3d(x, y, z), Eigen::Vector3d::Constant(grey)};
}

GaussianMap map_with_stats(const std::vector<double>& opacities, const std::vector<double>& grad_means,
                           double sigma = 0.001) {
    std::vector<GaussianPrimitive> prims(opacities.size());
    for (std::size_t i = 0; i < prims.size(); ++i) {
        prims[i].position = Eigen::Vector3f(float(i), 0, 0);
        prims[i].opacity_logit = float(logit(opacities[i]));
        prims[i].log_scale.setConstant(float(std::log(sigma)));
    }
    GaussianMap map(prims);
    for (std::size_t i = 0; i < grad_means.size(); ++i) {
        map.grad_stats()[i].grad_norm_sum = grad_means[i];
        map.grad_stats()[i].observations = 1;
        map.grad_stats()[i].position_grad_sum = Eigen::Vector3d(0, 0, 1);
    }
    return map;
}

}  // namespace

TEST_CASE("seed_from_points: single point falls back to the extent") {
    const std::vector<ColoredPoint> pts{point(1, 2, 3)};
    const auto seeds = seed_from_points(pts);
    REQUIRE(seeds.size() == 1);
    for (int a = 0; a < 3; ++a) CHECK(seeds[0].log_scale[a] == doctest::Approx(std::log(0.01)));
    CHECK(seed_from_points(pts, 5.0)[0].log_scale[0] == doctest::Approx(std::log(0.05)));
    CHECK(seeds[0].position == Eigen::Vector3f(1, 2, 3));
    CHECK(seeds[0].rotation == Eigen::Vector4f(1, 0, 0, 0));
    CHECK(seeds[0].opacity() == doctest::Approx(kSeedOpacity).epsilon(1e-6));
}

TEST_CASE("seed_from_points: collinear points") {
    const std::vector<ColoredPoint> pts{point(0, 0, 0), point(1, 0, 0), point(2, 0, 0)};
    const auto seeds = seed_from_points(pts);
    REQUIRE(seeds.size() == 3);
    CHECK(std::abs(seeds[1].log_scale[0]) < 1e-7);
    CHECK(seeds[0].log_scale[0] == doctest::Approx(std::log(1.5)));
}

TEST_CASE("seed_from_points: colors and degenerate input") {
    const std::vector<ColoredPoint> grey{point(0, 0, 0, 0.5)};
    for (int c = 0; c < 3; ++c) CHECK(seed_from_points(grey)[0].sh[c] == 0.0f);
    const std::vector<ColoredPoint> white{point(0, 0, 0, 1.0)};
    CHECK(eval_sh(seed_from_points(white)[0].sh, Eigen::Vector3d::UnitZ(), 0)[1] == doctest::Approx(1.0));

    CHECK(seed_from_points(std::vector<ColoredPoint>{}).empty());
    const std::vector<ColoredPoint> twins{point(1, 1, 1), point(1, 1, 1)};
    CHECK(seed_from_points(twins)[0].scale()[0] == doctest::Approx(kMinSeedScale).epsilon(1e-5));
    const std::vector<ColoredPoint> bad{point(NAN, 0, 0)};
    CHECK_THROWS_AS(seed_from_points(bad), InvalidParameter);
}

TEST_CASE("seed_from_points: existing positions count as neighbours") {
    const std::vector<ColoredPoint> pts{point(0, 0, 0)};
    const std::vector<Eigen::Vector3d> existing{{0.2, 0, 0}, {0, 0.4, 0}, {0, 0, 0.6}, {9, 9, 9}};
    CHECK(seed_from_points(pts, 1.0, existing)[0].log_scale[0] == doctest::Approx(std::log(0.4)));
}

TEST_CASE("accumulate_grad_stats") {
    GaussianMap map(std::vector<GaussianPrimitive>(2));
    ParamGrads g(2);
    g.contributions = {3, 0};
    accumulate_grad_stats(map, g);
    CHECK(map.grad_stats()[0].observations == 1);
    CHECK(map.grad_stats()[0].grad_norm_sum == 0.0);
    CHECK(map.grad_stats()[1].observations == 0);

    map.reset_grad_stats();
    g.mean2d_norm = {0.004, 0.0};
    accumulate_grad_stats(map, g);
    CHECK(map.grad_stats()[0].mean_grad_norm() == doctest::Approx(0.004));

    map.reset_grad_stats();
    g.mean2d_norm = {0.002, 0.0};
    accumulate_grad_stats(map, g);
    g.mean2d_norm = {0.006, 0.0};
    accumulate_grad_stats(map, g);
    CHECK(map.grad_stats()[0].mean_grad_norm() == doctest::Approx(0.004));

    CHECK_THROWS_AS(accumulate_grad_stats(map, ParamGrads(3)), InvalidParameter);
}

TEST_CASE("densify_and_prune: nothing to do") {
    GaussianMap map = map_with_stats({0.5, 0.7}, {0.0005, 0.0});
    const GaussianMap before = map;
    std::mt19937_64 rng(0);
    const auto r = densify_and_prune(map, DensifyConfig{}, 1.0, rng);
    CHECK(map == before);
    CHECK(r.n_new == 0);
    CHECK(r.survivors == std::vector<std::size_t>{0, 1});
    CHECK(map.grad_stats()[0].observations == 0);
}

TEST_CASE("densify_and_prune: prunes low opacity") {
    GaussianMap map = map_with_stats({0.01, 0.5}, {});
    std::mt19937_64 rng(0);
    const auto r = densify_and_prune(map, DensifyConfig{}, 1.0, rng);
    REQUIRE(map.size() == 1);
    CHECK(map[0].position.x() == 1.0f);
    CHECK(r.pruned == 1);
}

TEST_CASE("densify_and_prune: split bookkeeping") {
    GaussianMap map = map_with_stats({0.5, 0.5}, {0.0, 0.01}, 0.2);
    std::mt19937_64 rng(1);
    const auto r = densify_and_prune(map, DensifyConfig{}, 1.0, rng);
    CHECK(r.split == 1);
    CHECK(map.size() == 3);
    CHECK(r.survivors == std::vector<std::size_t>{0});
    for (std::size_t i = 1; i < 3; ++i)
        CHECK(map[i].scale()[0] == doctest::Approx(0.2 / 1.6).epsilon(1e-6));
}

TEST_CASE("densify_and_prune: small primitives are cloned along the negative gradient") {
    GaussianMap map = map_with_stats({0.5}, {0.01}, 0.001);
    std::mt19937_64 rng(1);
    DensifyConfig cfg;
    const auto r = densify_and_prune(map, cfg, 1.0, rng);
    CHECK(r.cloned == 1);
    REQUIRE(map.size() == 2);
    CHECK(map[1].position.z() == doctest::Approx(-cfg.clone_step));
    CHECK(map[1].log_scale == map[0].log_scale);
}

TEST_CASE("densify_and_prune: no survivor below the prune threshold") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> op, gm;
        for (int i = 0; i < 50; ++i) {
            op.push_back(0.001 + 0.1 * u(gen));
            gm.push_back(0.002 * u(gen));
        }
        GaussianMap map = map_with_stats(op, gm, 0.001 + 0.05 * u(gen));
        std::mt19937_64 rng(trial);
        densify_and_prune(map, DensifyConfig{}, 1.0, rng);
        for (const auto& p : map.primitives()) CHECK(p.opacity() >= 0.02);
    }
}

TEST_CASE("split children sample the parent distribution") {
    GaussianPrimitive parent;
    parent.position = Eigen::Vector3f(1, 2, 3);
    parent.log_scale = Eigen::Vector3f(std::log(0.3f), std::log(0.1f), std::log(0.2f));
    parent.rotation = Eigen::Vector4f(0.9f, 0.1f, -0.3f, 0.2f);
    parent.rotation.normalize();
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    Eigen::Matrix3d second = Eigen::Matrix3d::Zero();
    const int trials = 4000;
    std::mt19937_64 rng(3);
    for (int t = 0; t < trials; ++t) {
        GaussianMap map(std::vector<GaussianPrimitive>{parent});
        map.grad_stats()[0] = {1.0, 1, Eigen::Vector3d::UnitX()};
        const auto r = densify_and_prune(map, DensifyConfig{}, 1.0, rng);
        REQUIRE(r.survivors.empty());
        REQUIRE(map.size() == 2);
        for (const auto& c : map.primitives()) {
            const Eigen::Vector3d d = (c.position - parent.position).cast<double>();
            sum += d;
            second += d * d.transpose();
        }
    }
    const double n = 2.0 * trials;
    const Eigen::Matrix3d cov = second / n;
    const Eigen::Matrix3d want = build_covariance(parent.rotation.cast<double>(), parent.log_scale.cast<double>());
    CHECK((sum / n).norm() < 0.01);
    CHECK((cov - want).cwiseAbs().maxCoeff() < 0.1 * want.cwiseAbs().maxCoeff());
}
