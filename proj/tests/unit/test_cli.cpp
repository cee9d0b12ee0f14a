#include "gsalign_cli/cli.hpp"

#include "gsalign/ply.hpp"
#include "gsalign/synthetic.hpp"

#include "scenes.hpp"

#include <doctest.h>

#include <json.hpp>

#include <fstream>
#include <sstream>

using testing_support::read_file;
using testing_support::TempDir;
namespace fs = std::filesystem;
namespace cli = gsalign::cli;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "gsalign");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

/// Small dataset shared by the CLI tests.
const fs::path& dataset() {
    static TempDir dir("cli_data");
    static const bool made = [] {
        const auto r = run({"gen-synthetic", "--gaussians", "80", "--frames", "3", "--size", "32", "--seed", "5",
                            "-o", dir.path().string()});
        REQUIRE(r.code == 0);
        return true;
    }();
    (void)made;
    return dir.path();
}

}  // namespace

TEST_CASE("gen-synthetic") {
    TempDir dir("cli");
    const auto ok = run({"gen-synthetic", "--gaussians", "20", "--frames", "2", "--size", "16", "--seed", "7",
                         "-o", (dir / "out").string()});
    CHECK(ok.code == 0);
    CHECK(ok.out.find((dir / "out").string()) != std::string::npos);
    CHECK(fs::exists(dir / "out/trajectory.txt"));
    CHECK(fs::exists(dir / "out/gt_map.ply"));

    CHECK(run({"gen-synthetic", "--gaussians", "20"}).code == 2);
    CHECK(run({"gen-synthetic", "--gaussians", "0", "-o", (dir / "x").string()}).code == 2);
    CHECK(run({"gen-synthetic", "--frames", "many", "-o", (dir / "x").string()}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("train writes map, report and manifest") {
    TempDir dir("cli");
    const auto r = run({"train", dataset().string(), "-o", (dir / "run").string(), "--backward", "splat",
                        "--scheduler", "adaptive", "--lambda-o", "0.001", "--budget-iters", "5"});
    INFO(r.err);
    REQUIRE(r.code == 0);
    for (const char* f : {"map.ply", "report.csv", "manifest.json", "summary.json"})
        CHECK(fs::exists(dir / "run" / f));
    const std::string csv = read_file(dir / "run/report.csv");
    CHECK(csv.rfind("keyframe_id,iters,last_loss,psnr,ssim\n", 0) == 0);
    CHECK(csv.find("\nall,15,") != std::string::npos);

    const auto manifest = nlohmann::json::parse(read_file(dir / "run/manifest.json"));
    CHECK(manifest["command"] == "train");
    CHECK(manifest["status"] == "ok");
    CHECK(manifest["config"]["lambda-o"] == "0.001");
    CHECK(manifest.contains("git_describe"));
    CHECK(manifest["outputs"].contains("report"));
    CHECK(gsalign::load_map(dir / "run/map.ply").size() > 0);
}

TEST_CASE("train argument validation") {
    TempDir dir("cli");
    const std::string out = (dir / "run").string();
    CHECK(run({"train", dataset().string(), "-o", out, "--backward", "warp"}).code == 2);
    CHECK(run({"train", dataset().string(), "-o", out, "--scheduler", "random"}).code == 2);
    CHECK(run({"train", dataset().string(), "-o", out, "--budget-iters", "5", "--budget-ms", "10"}).code == 2);
    CHECK(run({"train", dataset().string(), "-o", out, "--lambda-o", "-1"}).code == 2);
    CHECK(run({"train", dataset().string(), "-o", out, "--budget-ms", "10", "--deterministic"}).code == 2);
    CHECK(run({"train", dataset().string()}).code == 2);
    const auto missing = run({"train", (dir / "nothing").string(), "-o", out, "--budget-iters", "1"});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("nothing") != std::string::npos);
}

TEST_CASE("deterministic training is reproducible") {
    TempDir dir("cli");
    auto train = [&](const std::string& name) {
        return run({"train", dataset().string(), "-o", (dir / name).string(), "--budget-iters", "6",
                    "--deterministic", "--seed", "3", "--threads", "2"});
    };
    REQUIRE(train("a").code == 0);
    REQUIRE(train("b").code == 0);
    CHECK(read_file(dir / "a/report.csv") == read_file(dir / "b/report.csv"));
    CHECK(read_file(dir / "a/map.ply") == read_file(dir / "b/map.ply"));
}

TEST_CASE("config file values yield to flags") {
    TempDir dir("cli");
    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "# training defaults\nbudget-iters = 4\nscheduler = uniform\nlambda-o = 0.5\ndeterministic = true\n";
    }
    const auto r = run({"train", dataset().string(), "--config", (dir / "run.cfg").string(), "-o",
                        (dir / "run").string(), "--lambda-o", "0.002"});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto m = nlohmann::json::parse(read_file(dir / "run/manifest.json"));
    CHECK(m["config"]["lambda-o"] == "0.002");
    CHECK(m["config"]["scheduler"] == "uniform");
    CHECK(read_file(dir / "run/report.csv").find("\nall,12,") != std::string::npos);

    {
        std::ofstream bad(dir / "bad.cfg");
        bad << "budget-iters 4\n";
    }
    CHECK(run({"train", dataset().string(), "--config", (dir / "bad.cfg").string(), "-o", (dir / "x").string()}).code == 2);
    CHECK(run({"train", dataset().string(), "--config", (dir / "none.cfg").string(), "-o", (dir / "x").string()}).code == 2);
}

TEST_CASE("eval of the ground-truth map hits the PSNR cap") {
    TempDir dir("cli");
    const auto r = run({"eval", dataset().string(), "-m", (dataset() / "gt_map.ply").string(), "-o",
                        (dir / "eval.csv").string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const std::string csv = read_file(dir / "eval.csv");
    CHECK(csv.rfind("frame_id,psnr,ssim,points\n", 0) == 0);
    CHECK(csv.find("mean,100.000000,1.000000,80\n") != std::string::npos);
    CHECK(fs::exists(dir / "eval.manifest.json"));

    CHECK(run({"eval", dataset().string(), "-m", (dir / "missing.ply").string()}).code == 1);
}

TEST_CASE("eval after short training") {
    TempDir dir("cli");
    REQUIRE(run({"train", dataset().string(), "-o", (dir / "run").string(), "--budget-iters", "10"}).code == 0);
    const auto r = run({"eval", dataset().string(), "-m", (dir / "run/map.ply").string()});
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string id, psnr, ssim, points;
        std::getline(row, id, ',');
        std::getline(row, psnr, ',');
        std::getline(row, ssim, ',');
        std::getline(row, points, ',');
        CHECK(std::isfinite(std::stod(psnr)));
        CHECK(std::stoul(points) > 0);
        ++rows;
    }
    CHECK(rows == 4);
}

TEST_CASE("render") {
    TempDir dir("cli");
    const std::string map = (dataset() / "gt_map.ply").string();
    const auto r = run({"render", dataset().string(), "-m", map, "-o", (dir / "img").string(), "--format", "ppm"});
    REQUIRE(r.code == 0);
    int images = 0;
    for (const auto& e : fs::directory_iterator(dir / "img")) images += e.path().extension() == ".ppm";
    CHECK(images == 3);
    CHECK(fs::exists(dir / "img/manifest.json"));

    fs::create_directories(dir / "empty");
    std::ofstream(dir / "empty/intrinsics.txt") << "32 32 16 16 32 32\n";
    std::ofstream(dir / "empty/trajectory.txt") << "# nothing\n";
    CHECK(run({"render", (dir / "empty").string(), "-m", map, "-o", (dir / "o").string()}).code == 2);
    CHECK(run({"render", dataset().string(), "-m", map, "-o", (dir / "o").string(), "--format", "gif"}).code == 2);
}

TEST_CASE("bench") {
    TempDir dir("cli");
    const auto r = run({"bench", "--splats", "300", "--size", "48", "--reps", "1", "--threads", "2", "-o",
                        (dir / "bench.csv").string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const std::string csv = read_file(dir / "bench.csv");
    CHECK(csv.rfind("mode,n_splats,image,mean_ms,std_ms,max_grad_rel_diff\n", 0) == 0);
    CHECK(csv.find("\npixel,300,48x48,") != std::string::npos);
    CHECK(csv.find("\nsplat,300,48x48,") != std::string::npos);
    CHECK(fs::exists(dir / "bench.manifest.json"));

    const auto one = run({"bench", "--splats", "1", "--size", "32", "--reps", "2"});
    CHECK(one.code == 0);
    CHECK(one.out.find("splat,1,32x32,") != std::string::npos);

    CHECK(run({"bench", "--reps", "0"}).code == 2);
    CHECK(run({"bench", "--splats", "200", "--size", "32", "--reps", "1", "--tolerance", "-1"}).code == 1);
}

TEST_CASE("overlap scene") {
    const auto s = cli::make_overlap_scene(50, 64, 1);
    CHECK(s.map.size() == 50);
    CHECK(s.camera.width == 64);
    CHECK_THROWS(cli::make_overlap_scene(0, 64, 1));
}
