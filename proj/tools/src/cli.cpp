#include "gsalign_cli/cli.hpp"

#include "gsalign/error.hpp"
#include "gsalign/image_io.hpp"
#include "gsalign/losses.hpp"
#include "gsalign/ply.hpp"
#include "gsalign/posed_dataset.hpp"
#include "gsalign/rasterizer.hpp"
#include "gsalign/synthetic.hpp"
#include "gsalign/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#ifndef GSALIGN_GIT_DESCRIBE
#define GSALIGN_GIT_DESCRIBE "unknown"
#endif

namespace gsalign::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

/// A usage or validation problem detected after CLI11 parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Resolved option values of a subcommand, from CLI11's own config dump.
json resolved_options(const CLI::App& app) {
    json out = json::object();
    std::istringstream in(app.config_to_str(true, false));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos || line.empty() || line[0] == '[' || line[0] == '#') continue;
        std::string value = line.substr(eq + 1);
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
            value.back() == value.front())
            value = value.substr(1, value.size() - 2);
        out[line.substr(0, eq)] = value;
    }
    return out;
}

/// Manifest written before work starts and completed afterwards.
class Manifest {
public:
    Manifest(fs::path path, const std::string& command, const std::vector<std::string>& args,
             const CLI::App& app, std::uint64_t seed)
        : path_(std::move(path)) {
        doc_["command"] = command;
        doc_["argv"] = args;
        doc_["config"] = resolved_options(app);
        doc_["seed"] = seed;
        doc_["git_describe"] = GSALIGN_GIT_DESCRIBE;
        doc_["start_time"] = utc_now();
        doc_["end_time"] = nullptr;
        doc_["status"] = "running";
        doc_["outputs"] = json::object();
        write();
    }

    void output(const std::string& key, const fs::path& p) { doc_["outputs"][key] = p.string(); }
    json& extra() { return doc_; }

    void finish(const std::string& status) {
        doc_["end_time"] = utc_now();
        doc_["status"] = status;
        write();
    }

private:
    void write() const {
        std::ofstream out(path_);
        if (!out) throw IoError("cannot write " + path_.string());
        out << doc_.dump(2) << "\n";
    }

    fs::path path_;
    json doc_;
};

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
}

// ---------------------------------------------------------------------------
// gen-synthetic
// ---------------------------------------------------------------------------

struct GenArgs {
    SyntheticOptions options;
    std::string output;
};

void add_gen(CLI::App& app, GenArgs& a) {
    app.add_option("--gaussians", a.options.n_gaussians, "Ground-truth primitive count")
        ->capture_default_str();
    app.add_option("--frames", a.options.n_frames, "Number of posed frames")->capture_default_str();
    app.add_option("--size", a.options.image_size, "Square image side in pixels")->capture_default_str();
    app.add_option("--seed", a.options.seed, "Generator seed")->capture_default_str();
    app.add_option("--points-per-frame", a.options.points_per_frame, "Sparse points per frame")
        ->capture_default_str();
    app.add_option("-o,--output", a.output, "Output dataset directory")->required();
}

int run_gen(const GenArgs& a, std::ostream& out) {
    a.options.validate();
    gen_synthetic(a.options, a.output);
    out << fs::path(a.output).string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string dataset;
    std::string output;
    std::string backward = "splat";
    std::string scheduler = "adaptive";
    std::optional<double> budget_iters;
    std::optional<double> budget_ms;
    bool no_densify = false;
    bool verbose = false;
    double sync_window = kDefaultSyncWindow;
    TrainConfig config;
};

void add_train(CLI::App& app, TrainArgs& a) {
    auto& c = a.config;
    app.add_option("dataset", a.dataset, "Posed dataset directory")->required();
    app.add_option("-o,--output", a.output, "Run directory (map.ply, report.csv, manifest.json)")
        ->required();
    app.add_option("--backward", a.backward, "Backward mode")
        ->check(CLI::IsMember({"pixel", "splat"}))
        ->capture_default_str();
    app.add_option("--scheduler", a.scheduler, "Keyframe scheduler")
        ->check(CLI::IsMember({"adaptive", "uniform"}))
        ->capture_default_str();
    app.add_option("--lambda-o", c.lambda_o, "Opacity regularization weight")->capture_default_str();
    app.add_option("--lambda-ssim", c.lambda_ssim, "SSIM weight in the rendered loss")
        ->capture_default_str();
    app.add_option("--d", c.d, "Refill divisor")->capture_default_str();
    app.add_option("--r0", c.r0, "Initial budget of a new keyframe")->capture_default_str();
    app.add_option("--budget-iters", a.budget_iters, "Iterations per keyframe arrival (default 100)");
    app.add_option("--budget-ms", a.budget_ms, "Wall-clock milliseconds per keyframe arrival");
    app.add_option("--max-iters", c.max_iterations, "Total iteration cap, 0 for none")
        ->capture_default_str();
    app.add_option("--refine-iters", c.refine_iterations, "Iterations after the stream ends")
        ->capture_default_str();
    app.add_option("--seed", c.seed, "Training seed")->capture_default_str();
    app.add_flag("--deterministic", c.deterministic, "Deterministic reductions (needs --budget-iters)");
    app.add_option("--threads", c.num_threads, "Worker threads, 0 for the OpenMP default")
        ->capture_default_str();
    app.add_option("--sh-degree", c.sh_degree, "Spherical-harmonic degree")->capture_default_str();
    app.add_option("--densify-interval", c.densify.interval, "Iterations between densification")
        ->capture_default_str();
    app.add_option("--grad-threshold", c.densify.grad_threshold, "Densification gradient threshold")
        ->capture_default_str();
    app.add_option("--prune-opacity", c.densify.prune_opacity, "Pruning opacity threshold")
        ->capture_default_str();
    app.add_flag("--no-densify", a.no_densify, "Disable clone/split/prune");
    app.add_option("--lr-horizon", c.optimizer.position_lr_horizon, "Position learning-rate decay steps")
        ->capture_default_str();
    app.add_option("--sync-window", a.sync_window, "Pose/image soft-sync window in seconds")
        ->capture_default_str();
    app.add_flag("-v,--verbose", a.verbose, "Log densification events");
}

int run_train(TrainArgs& a, const CLI::App& app, const std::vector<std::string>& args,
              std::ostream& out, std::ostream& err) {
    auto& c = a.config;
    c.backward_mode = a.backward == "pixel" ? BackwardMode::pixel : BackwardMode::splat;
    c.scheduler_mode = a.scheduler == "uniform" ? SchedulerMode::uniform : SchedulerMode::adaptive;
    c.densify_enabled = !a.no_densify;
    if (a.budget_iters && a.budget_ms) throw UsageError("--budget-iters and --budget-ms are exclusive");
    if (a.budget_ms) {
        c.budget_kind = BudgetKind::wall_ms;
        c.budget = *a.budget_ms;
    } else {
        c.budget_kind = BudgetKind::iterations;
        c.budget = a.budget_iters.value_or(100.0);
    }
    try {
        c.validate();
    } catch (const InvalidParameter& e) {
        throw UsageError(e.what());
    }

    const fs::path dir = a.output;
    ensure_dir(dir);
    Manifest manifest(dir / "manifest.json", "train", args, app, c.seed);
    manifest.output("map", dir / "map.ply");
    manifest.output("report", dir / "report.csv");
    manifest.output("summary", dir / "summary.json");

    PosedDataset dataset(a.dataset, a.sync_window);
    if (dataset.skipped() > 0)
        err << "warning: " << dataset.skipped() << " pose(s) had no image within "
            << a.sync_window << " s and were skipped\n";
    const TrainResult result = run_stream(dataset, c, a.verbose ? &err : nullptr);

    save_map(dir / "map.ply", result.map);
    {
        auto csv = open_out(dir / "report.csv");
        write_report_csv(csv, result.report);
    }
    const auto& r = result.report;
    json summary;
    summary["total_iterations"] = r.total_iterations;
    summary["seconds"] = r.seconds;
    summary["iterations_per_second"] = r.iterations_per_second;
    summary["final_count"] = r.final_count;
    summary["densify_events"] = r.densify_events;
    summary["scene_extent"] = r.scene_extent;
    summary["mean_psnr"] = r.mean_psnr();
    summary["min_psnr"] = r.min_psnr();
    summary["mean_ssim"] = r.mean_ssim();
    summary["skipped_poses"] = dataset.skipped();
    {
        auto f = open_out(dir / "summary.json");
        f << summary.dump(2) << "\n";
    }
    manifest.extra()["summary"] = summary;
    manifest.finish("ok");
    out << "trained " << r.keyframes.size() << " keyframes, " << r.total_iterations
        << " iterations, " << r.final_count << " primitives, mean PSNR " << r.mean_psnr()
        << " dB -> " << dir.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchArgs {
    int splats = 10000;
    int size = 256;
    int reps = 5;
    int threads = 8;
    std::uint64_t seed = 0;
    double tolerance = 1e-5;
    std::string output;
};

void add_bench(CLI::App& app, BenchArgs& a) {
    app.add_option("--splats", a.splats, "Number of overlapping splats")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--size", a.size, "Square image side")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--reps", a.reps, "Timed repetitions per mode")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--threads", a.threads, "Parallel workers")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--seed", a.seed, "Scene seed")->capture_default_str();
    app.add_option("--tolerance", a.tolerance, "Gradient-equality gate")->capture_default_str();
    app.add_option("-o,--output", a.output, "CSV path (stdout when omitted)");
}

struct Timing {
    double mean_ms = 0.0;
    double std_ms = 0.0;
};

Timing time_it(int reps, const std::function<void()>& f) {
    std::vector<double> ms;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    Timing t;
    t.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / ms.size();
    for (double v : ms) t.std_ms += (v - t.mean_ms) * (v - t.mean_ms);
    t.std_ms = std::sqrt(t.std_ms / ms.size());
    return t;
}

int run_bench(const BenchArgs& a, const CLI::App& app, const std::vector<std::string>& args,
              std::ostream& out, std::ostream& err) {
    std::optional<Manifest> manifest;
    if (!a.output.empty()) {
        const fs::path csv = a.output;
        if (csv.has_parent_path()) ensure_dir(csv.parent_path());
        manifest.emplace(fs::path(csv).replace_extension(".manifest.json"), "bench", args, app, a.seed);
        manifest->output("csv", csv);
    }

    const OverlapScene scene = make_overlap_scene(a.splats, a.size, a.seed);
    RasterOptions opts;
    opts.num_threads = a.threads;
    opts.reduction = ReductionMode::parallel;

    Image grad(a.size, a.size);
    std::mt19937_64 rng(a.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& g : grad.data) g = u(rng) / double(grad.data.size());

    RenderOutput<float> render;
    const Timing fwd = time_it(a.reps, [&] { render = rasterize_forward<float>(scene.map, scene.camera, opts); });
    ParamGrads pixel, splat;
    const Timing tp = time_it(a.reps, [&] { pixel = backward_pixelwise(render, scene.map, scene.camera, grad); });
    const Timing ts = time_it(a.reps, [&] { splat = backward_splatwise(render, scene.map, scene.camera, grad); });

    // Equality gate on deterministic reductions, so summation order is the same in both modes.
    RasterOptions det = opts;
    det.reduction = ReductionMode::deterministic;
    const auto ref = rasterize_forward<float>(scene.map, scene.camera, det);
    const double diff = max_relative_difference(backward_splatwise(ref, scene.map, scene.camera, grad),
                                                backward_pixelwise(ref, scene.map, scene.camera, grad));
    const double timed_diff = max_relative_difference(splat, pixel);

    std::ostringstream csv;
    char buf[256];
    csv << "mode,n_splats,image,mean_ms,std_ms,max_grad_rel_diff\n";
    const std::string image = std::to_string(a.size) + "x" + std::to_string(a.size);
    auto row = [&](const char* mode, const Timing& t, double d) {
        std::snprintf(buf, sizeof buf, "%s,%d,%s,%.4f,%.4f,%.3e\n", mode, a.splats, image.c_str(),
                      t.mean_ms, t.std_ms, d);
        csv << buf;
    };
    row("forward", fwd, 0.0);
    row("pixel", tp, diff);
    row("splat", ts, diff);

    if (a.output.empty()) {
        out << csv.str();
    } else {
        auto f = open_out(a.output);
        f << csv.str();
        out << "pixel " << tp.mean_ms << " ms, splat " << ts.mean_ms << " ms, speedup "
            << tp.mean_ms / ts.mean_ms << "x, max grad rel diff " << diff << " -> " << a.output << "\n";
    }
    if (manifest) {
        manifest->extra()["speedup"] = tp.mean_ms / ts.mean_ms;
        manifest->extra()["max_grad_rel_diff"] = diff;
        manifest->extra()["timed_grad_rel_diff"] = timed_diff;
    }
    if (!(diff <= a.tolerance)) {
        err << "gradient mismatch: splat-wise vs pixel-wise max relative difference " << diff
            << " exceeds " << a.tolerance << "\n";
        if (manifest) manifest->finish("gradient_mismatch");
        return kExitFailure;
    }
    if (manifest) manifest->finish("ok");
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval / render
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string map;
    std::string dataset;
    std::string output;
    double sync_window = kDefaultSyncWindow;
};

void add_eval(CLI::App& app, EvalArgs& a) {
    app.add_option("dataset", a.dataset, "Posed dataset directory with target images")->required();
    app.add_option("-m,--map", a.map, "Map PLY")->required();
    app.add_option("-o,--output", a.output, "CSV path (stdout when omitted)");
    app.add_option("--sync-window", a.sync_window, "Pose/image soft-sync window in seconds")
        ->capture_default_str();
}

int run_eval(const EvalArgs& a, const CLI::App& app, const std::vector<std::string>& args,
             std::ostream& out, std::ostream& err) {
    std::optional<Manifest> manifest;
    if (!a.output.empty()) {
        const fs::path csv = a.output;
        if (csv.has_parent_path()) ensure_dir(csv.parent_path());
        manifest.emplace(fs::path(csv).replace_extension(".manifest.json"), "eval", args, app, 0);
        manifest->output("csv", csv);
    }
    const GaussianMap map = load_map(a.map);
    PosedDataset dataset(a.dataset, a.sync_window);
    if (dataset.skipped() > 0) err << "warning: " << dataset.skipped() << " pose(s) skipped\n";
    const auto frames = dataset.load_all();
    if (frames.empty()) throw Error("dataset " + a.dataset + " has no posed frames to evaluate");

    std::ostringstream csv;
    char buf[256];
    csv << "frame_id,psnr,ssim,points\n";
    RasterOptions opts;
    opts.checkpointing = false;
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (const auto& f : frames) {
        const Image img = rasterize_forward<double>(map, f.camera, opts).image;
        const double p = psnr(img, f.image), s = ssim_metric(img, f.image);
        psnr_sum += p;
        ssim_sum += s;
        std::snprintf(buf, sizeof buf, "%u,%.6f,%.6f,%zu\n", f.id, p, s, map.size());
        csv << buf;
    }
    const double n = double(frames.size());
    std::snprintf(buf, sizeof buf, "mean,%.6f,%.6f,%zu\n", psnr_sum / n, ssim_sum / n, map.size());
    csv << buf;

    if (a.output.empty()) {
        out << csv.str();
    } else {
        auto f = open_out(a.output);
        f << csv.str();
        out << "mean PSNR " << psnr_sum / n << " dB, mean SSIM " << ssim_sum / n << ", "
            << map.size() << " points -> " << a.output << "\n";
        manifest->finish("ok");
    }
    return kExitOk;
}

struct RenderArgs {
    std::string map;
    std::string poses;
    std::string output;
    std::string format = "png";
};

void add_render(CLI::App& app, RenderArgs& a) {
    app.add_option("poses", a.poses, "Directory holding intrinsics.txt and trajectory.txt")->required();
    app.add_option("-m,--map", a.map, "Map PLY")->required();
    app.add_option("-o,--output", a.output, "Output image directory")->required();
    app.add_option("--format", a.format, "Image format")
        ->check(CLI::IsMember({"png", "ppm"}))
        ->capture_default_str();
}

int run_render(const RenderArgs& a, const CLI::App& app, const std::vector<std::string>& args,
               std::ostream& out) {
    const fs::path root = a.poses;
    const Intrinsics k = parse_intrinsics(root / "intrinsics.txt");
    const auto trajectory = parse_trajectory(root / "trajectory.txt");
    if (trajectory.empty()) throw UsageError("no poses in " + (root / "trajectory.txt").string());
    const GaussianMap map = load_map(a.map);

    const fs::path dir = a.output;
    ensure_dir(dir);
    Manifest manifest(dir / "manifest.json", "render", args, app, 0);
    std::vector<Camera> cameras;
    for (const auto& e : trajectory) cameras.push_back(camera_from_pose(k, e));
    const auto images = render_trajectory(map, cameras);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const fs::path p = dir / (timestamp_stem(trajectory[i].timestamp) + "." + a.format);
        write_image(p, images[i]);
    }
    manifest.extra()["frames"] = images.size();
    manifest.finish("ok");
    out << "rendered " << images.size() << " frames -> " << dir.string() << "\n";
    return kExitOk;
}

}  // namespace

std::vector<std::string> config_file_arguments(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::vector<std::string> out;
    std::string line;
    long line_no = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key=value in " + path, line_no);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError("empty key in " + path, line_no);
        if (value == "true") {
            out.push_back("--" + key);
        } else if (value != "false") {
            out.push_back("--" + key);
            out.push_back(value);
        }
    }
    return out;
}

OverlapScene make_overlap_scene(int n, int size, std::uint64_t seed) {
    if (n < 1 || size < 1) throw InvalidParameter("overlap scene needs n >= 1 and size >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<GaussianPrimitive> prims(n);
    for (auto& p : prims) {
        const double z = 2.5 + u(rng);
        p.position = Eigen::Vector3f(float(0.05 * (u(rng) - 0.5) * z), float(0.05 * (u(rng) - 0.5) * z),
                                     float(z));
        // Footprints of roughly 0.15 to 0.35 of the image width around the center.
        for (int a = 0; a < 3; ++a) p.log_scale[a] = float(std::log((0.05 + 0.07 * u(rng)) * z / 3.0));
        p.opacity_logit = float(logit(0.05 + 0.25 * u(rng)));
        Eigen::Vector4f q(float(1.0 + u(rng)), float(u(rng) - 0.5), float(u(rng) - 0.5), float(u(rng) - 0.5));
        p.rotation = q.normalized();
        for (int c = 0; c < 3; ++c) p.sh[c] = float((u(rng) - 0.5) * 2.0);
    }
    OverlapScene s;
    s.map = GaussianMap(std::move(prims));
    s.camera.fx = s.camera.fy = size;
    s.camera.cx = s.camera.cy = size / 2.0;
    s.camera.width = s.camera.height = size;
    return s;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app("Desk-scale differentiable Gaussian-splatting trainer", "gsalign");
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(GSALIGN_GIT_DESCRIBE));
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    GenArgs gen;
    TrainArgs train;
    BenchArgs bench;
    EvalArgs eval;
    RenderArgs render;
    std::string config_path;
    auto* gen_cmd = app.add_subcommand("gen-synthetic", "Generate a synthetic posed dataset");
    auto* train_cmd = app.add_subcommand("train", "Train a map on a posed dataset stream");
    auto* bench_cmd = app.add_subcommand("bench", "Time forward and both backward modes");
    auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM of a map against dataset images");
    auto* render_cmd = app.add_subcommand("render", "Render a map along a trajectory");
    for (auto* sub : {gen_cmd, train_cmd, bench_cmd, eval_cmd, render_cmd})
        sub->add_option("--config", config_path, "key=value file; command-line flags take precedence");
    add_gen(*gen_cmd, gen);
    add_train(*train_cmd, train);
    add_bench(*bench_cmd, bench);
    add_eval(*eval_cmd, eval);
    add_render(*render_cmd, render);

    // Config values are spliced in right after the subcommand so later flags win.
    std::vector<std::string> args = raw_args;
    try {
        for (std::size_t i = 2; i < args.size(); ++i) {
            std::string path;
            std::size_t span = 0;
            if (args[i] == "--config" && i + 1 < args.size()) {
                path = args[i + 1];
                span = 2;
            } else if (args[i].rfind("--config=", 0) == 0) {
                path = args[i].substr(9);
                span = 1;
            }
            if (span == 0) continue;
            auto extra = config_file_arguments(path);
            args.erase(args.begin() + i, args.begin() + i + span);
            args.insert(args.begin() + 2, extra.begin(), extra.end());
            break;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen_cmd) {
            try {
                gen.options.validate();
            } catch (const InvalidParameter& e) {
                throw UsageError(e.what());
            }
            return run_gen(gen, out);
        }
        if (*train_cmd) return run_train(train, *train_cmd, args, out, err);
        if (*bench_cmd) return run_bench(bench, *bench_cmd, args, out, err);
        if (*eval_cmd) return run_eval(eval, *eval_cmd, args, out, err);
        if (*render_cmd) return run_render(render, *render_cmd, args, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace gsalign::cli
