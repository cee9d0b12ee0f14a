#include "gsalign/densify.hpp"
#include "gsalign/error.hpp"
#include "gsalign/losses.hpp"
#include "gsalign/posed_dataset.hpp"
#include "gsalign/synthetic.hpp"
#include "gsalign/trainer.hpp"

#include "scenes.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace gsalign;

namespace {

const SyntheticScene& small_scene() {
    static const SyntheticScene scene = [] {
        SyntheticOptions opt;
        opt.n_gaussians = 150;
        opt.n_frames = 6;
        opt.image_size = 48;
        opt.seed = 3;
        return generate_synthetic(opt);
    }();
    return scene;
}

std::vector<Keyframe> keyframes(const SyntheticScene& s, std::size_t n) {
    std::vector<Keyframe> out;
    for (std::size_t i = 0; i < n && i < s.images.size(); ++i) {
        Keyframe kf;
        kf.id = KeyframeId(i);
        kf.timestamp = s.trajectory[i].timestamp;
        kf.camera = s.cameras[i];
        kf.image = s.images[i];
        kf.points = s.points[i];
        out.push_back(std::move(kf));
    }
    return out;
}

TrainConfig quick_config() {
    TrainConfig c;
    c.budget = 20;
    c.deterministic = true;
    c.num_threads = 2;
    c.densify.interval = 40;
    c.seed = 11;
    return c;
}

std::string report_csv(const TrainReport& r) {
    std::ostringstream ss;
    write_report_csv(ss, r);
    return ss.str();
}

class FailingSource : public KeyframeSource {
public:
    explicit FailingSource(std::vector<Keyframe> frames) : frames_(std::move(frames)) {}
    std::optional<Keyframe> next() override {
        if (cursor_ == 2) throw ParseError("frame 2 (t=0.200000): broken points file");
        if (cursor_ >= frames_.size()) return std::nullopt;
        return frames_[cursor_++];
    }

private:
    std::vector<Keyframe> frames_;
    std::size_t cursor_ = 0;
};

}  // namespace

TEST_CASE("training a single keyframe lowers the rendered loss") {
    const auto frames = keyframes(small_scene(), 1);
    const auto& pts = frames[0].points;
    Eigen::Vector3d lo = pts[0].position, hi = pts[0].position;
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p.position);
        hi = hi.cwiseMax(p.position);
    }
    const GaussianMap seeded(seed_from_points(pts, (hi - lo).norm()));
    const Image before = render_trajectory(seeded, {frames[0].camera})[0];
    const double initial = rendered_loss(before, frames[0].image).value;

    TrainConfig cfg = quick_config();
    cfg.budget = 200;
    VectorKeyframeSource src(frames);
    const auto result = run_stream(src, cfg);
    const Image after = render_trajectory(result.map, {frames[0].camera})[0];
    CHECK(rendered_loss(after, frames[0].image).value < initial);
    CHECK(result.report.total_iterations == 200);
    CHECK(result.report.keyframes.at(0).iterations == 200);
    CHECK(std::isfinite(result.report.keyframes[0].last_loss));
}

TEST_CASE("deterministic runs give identical reports and maps") {
    const auto frames = keyframes(small_scene(), 5);
    auto run = [&] {
        VectorKeyframeSource src(frames);
        return run_stream(src, quick_config());
    };
    const auto a = run(), b = run();
    CHECK(report_csv(a.report) == report_csv(b.report));
    CHECK(a.map == b.map);
    CHECK(a.report.densify_events == 2);
}

TEST_CASE("iteration budgets are spent exactly") {
    const auto frames = keyframes(small_scene(), 5);
    TrainConfig cfg = quick_config();
    cfg.budget = 7;
    cfg.refine_iterations = 13;
    {
        VectorKeyframeSource src(frames);
        const auto r = run_stream(src, cfg).report;
        CHECK(r.total_iterations == 5 * 7 + 13);
        std::uint64_t sum = 0;
        for (const auto& k : r.keyframes) sum += k.iterations;
        CHECK(sum == r.total_iterations);
        CHECK(r.keyframes.size() == 5);
    }
    cfg.max_iterations = 30;
    cfg.scheduler_mode = SchedulerMode::uniform;
    cfg.backward_mode = BackwardMode::pixel;
    {
        VectorKeyframeSource src(frames);
        const auto r = run_stream(src, cfg).report;
        CHECK(r.total_iterations == 30);
        std::uint64_t sum = 0;
        for (const auto& k : r.keyframes) sum += k.iterations;
        CHECK(sum == 30);
    }
}

TEST_CASE("wall-clock budgets") {
    const auto frames = keyframes(small_scene(), 3);
    TrainConfig cfg;
    cfg.budget_kind = BudgetKind::wall_ms;
    cfg.budget = 150;
    VectorKeyframeSource src(frames);
    const auto r = run_stream(src, cfg).report;
    CHECK(r.total_iterations > 3);
    CHECK(r.seconds >= 0.45);
    std::uint64_t sum = 0;
    for (const auto& k : r.keyframes) sum += k.iterations;
    CHECK(sum == r.total_iterations);

    cfg.deterministic = true;
    VectorKeyframeSource again(frames);
    CHECK_THROWS_AS(run_stream(again, cfg), InvalidParameter);
}

TEST_CASE("source errors reach the caller") {
    FailingSource src(keyframes(small_scene(), 4));
    try {
        run_stream(src, quick_config());
        FAIL("expected an error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("frame 2") != std::string::npos);
    }

    VectorKeyframeSource empty({});
    CHECK_THROWS_AS(run_stream(empty, quick_config()), InvalidParameter);

    auto dup = keyframes(small_scene(), 2);
    dup[1].id = dup[0].id;
    VectorKeyframeSource twice(dup);
    CHECK_THROWS_AS(run_stream(twice, quick_config()), InvalidParameter);
}

TEST_CASE("render_trajectory") {
    const auto& s = small_scene();
    CHECK(render_trajectory(s.ground_truth, {}).empty());
    const auto twice = render_trajectory(s.ground_truth, {s.cameras[1], s.cameras[1]});
    REQUIRE(twice.size() == 2);
    CHECK(twice[0].data == twice[1].data);
    const auto all = render_trajectory(s.ground_truth, s.cameras);
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(mse(all[i], s.images[i]) <= 1e-6);
}

TEST_CASE("report CSV layout") {
    TrainReport r;
    r.keyframes.push_back({0, 0.0, 5, 0.25, 30.5, 0.9});
    r.keyframes.push_back({3, 0.3, 7, 0.125, 20.0, 0.7});
    r.total_iterations = 12;
    const std::string csv = report_csv(r);
    CHECK(csv ==
          "keyframe_id,iters,last_loss,psnr,ssim\n"
          "0,5,0.25,30.500000,0.900000\n"
          "3,7,0.125,20.000000,0.700000\n"
          "all,12,0.1875,25.250000,0.800000\n");
}

TEST_CASE("config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.lambda_o = -1;
    CHECK_THROWS_AS(c.validate(), InvalidParameter);
    c = TrainConfig{};
    c.budget = 0;
    CHECK_THROWS_AS(c.validate(), InvalidParameter);
    c = TrainConfig{};
    c.budget = 2.5;
    CHECK_THROWS_AS(c.validate(), InvalidParameter);
    c = TrainConfig{};
    c.d = 0;
    CHECK_THROWS_AS(c.validate(), InvalidParameter);
}
