#include "gsalign/trainer.hpp"
#include "gsalign/bounded_queue.hpp"
#include "gsalign/error.hpp"
#include "gsalign/losses.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <ostream>
#include <random>
#include <thread>
#include <unordered_map>

namespace gsalign {

void TrainConfig::validate() const {
    if (!(lambda_ssim >= 0.0 && lambda_ssim <= 1.0)) throw InvalidParameter("lambda_ssim must be in [0, 1]");
    if (!(lambda_o >= 0.0)) throw InvalidParameter("lambda_o must be >= 0");
    if (d < 1) throw InvalidParameter("d must be >= 1");
    if (r0 < 1) throw InvalidParameter("r0 must be >= 1");
    if (!(budget > 0.0) || !std::isfinite(budget)) throw InvalidParameter("budget must be > 0");
    if (budget_kind == BudgetKind::iterations && budget != std::floor(budget))
        throw InvalidParameter("iteration budget must be a whole number");
    if (deterministic && budget_kind == BudgetKind::wall_ms)
        throw InvalidParameter("deterministic runs need an iteration budget, not a wall-clock one");
    if (sh_degree < 0 || sh_degree > kMaxShDegree) throw InvalidParameter("sh_degree must be in [0, 3]");
    if (num_threads < 0) throw InvalidParameter("num_threads must be >= 0");
    if (queue_capacity < 1) throw InvalidParameter("queue_capacity must be >= 1");
    if (!background.allFinite()) throw InvalidParameter("background must be finite");
    densify.validate();
    optimizer.validate();
}

RasterOptions TrainConfig::raster_options() const {
    RasterOptions o;
    o.sh_degree = sh_degree;
    o.background = background;
    o.num_threads = num_threads;
    o.reduction = deterministic ? ReductionMode::deterministic : ReductionMode::parallel;
    return o;
}

const char* to_string(BackwardMode mode) { return mode == BackwardMode::pixel ? "pixel" : "splat"; }
const char* to_string(SchedulerMode mode) {
    return mode == SchedulerMode::adaptive ? "adaptive" : "uniform";
}
const char* to_string(BudgetKind kind) { return kind == BudgetKind::iterations ? "iterations" : "wall_ms"; }

double TrainReport::mean_psnr() const {
    if (keyframes.empty()) return 0.0;
    double s = 0.0;
    for (const auto& k : keyframes) s += k.psnr;
    return s / double(keyframes.size());
}

double TrainReport::min_psnr() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& k : keyframes) m = std::min(m, k.psnr);
    return keyframes.empty() ? 0.0 : m;
}

double TrainReport::mean_ssim() const {
    if (keyframes.empty()) return 0.0;
    double s = 0.0;
    for (const auto& k : keyframes) s += k.ssim;
    return s / double(keyframes.size());
}

namespace {

using Clock = std::chrono::steady_clock;

class Trainer {
public:
    Trainer(const TrainConfig& config, std::ostream* log)
        : config_(config),
          raster_(config.raster_options()),
          scheduler_({config.d, config.r0, config.seed ^ 0x5ced5ced5ced5cedULL}),
          optimizer_(config.optimizer, 0),
          rng_(config.seed),
          log_(log) {}

    void arrive(Keyframe kf) {
        if (index_.count(kf.id)) throw InvalidParameter("duplicate keyframe id " + std::to_string(kf.id));
        if (kf.image.width != kf.camera.width || kf.image.height != kf.camera.height)
            throw InvalidParameter("keyframe " + std::to_string(kf.id) + ": image size differs from camera");
        scheduler_.add_keyframe(kf.id);
        index_[kf.id] = frames_.size();
        if (!kf.points.empty()) seed(kf.points);
        frames_.push_back({std::move(kf), 0, std::numeric_limits<double>::quiet_NaN()});

        if (config_.budget_kind == BudgetKind::iterations) {
            run_iterations(static_cast<std::uint64_t>(config_.budget));
        } else {
            const auto deadline =
                Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                   std::chrono::duration<double, std::milli>(config_.budget));
            while (Clock::now() < deadline && !capped()) iterate();
        }
    }

    void run_iterations(std::uint64_t n) {
        for (std::uint64_t i = 0; i < n && !capped(); ++i) iterate();
    }

    TrainResult finish(double seconds) {
        TrainResult out;
        auto& r = out.report;
        r.config = config_;
        r.total_iterations = iterations_;
        r.seconds = seconds;
        r.iterations_per_second = seconds > 0.0 ? double(iterations_) / seconds : 0.0;
        r.final_count = map_.size();
        r.densify_events = densify_events_;
        r.scene_extent = extent();
        RasterOptions eval = raster_;
        eval.checkpointing = false;
        for (const auto& f : frames_) {
            KeyframeReport k;
            k.id = f.keyframe.id;
            k.timestamp = f.keyframe.timestamp;
            k.iterations = f.iterations;
            k.last_loss = f.last_loss;
            const auto render = rasterize_forward<double>(map_, f.keyframe.camera, eval);
            k.psnr = psnr(render.image, f.keyframe.image);
            k.ssim = ssim_metric(render.image, f.keyframe.image);
            r.keyframes.push_back(k);
        }
        out.map = std::move(map_);
        return out;
    }

private:
    struct Frame {
        Keyframe keyframe;
        std::uint64_t iterations;
        double last_loss;
    };

    bool capped() const { return config_.max_iterations != 0 && iterations_ >= config_.max_iterations; }

    double extent() const {
        if (!have_bounds_) return 1.0;
        const double diag = (hi_ - lo_).norm();
        return diag > 0.0 ? diag : 1.0;
    }

    void seed(const std::vector<ColoredPoint>& points) {
        for (const auto& p : points) {
            if (!have_bounds_) {
                lo_ = hi_ = p.position;
                have_bounds_ = true;
            }
            lo_ = lo_.cwiseMin(p.position);
            hi_ = hi_.cwiseMax(p.position);
        }
        std::vector<Eigen::Vector3d> existing;
        existing.reserve(map_.size());
        for (const auto& p : map_.primitives()) existing.push_back(p.position.cast<double>());
        const auto prims = seed_from_points(points, extent(), existing);
        const std::size_t before = map_.size();
        map_.insert(prims);
        std::vector<std::size_t> all(before);
        for (std::size_t i = 0; i < before; ++i) all[i] = i;
        optimizer_.resize_for_densify(all, prims.size());
    }

    void iterate() {
        // Densification due after iteration n runs before iteration n + 1, so a run never
        // ends on freshly split, unoptimized primitives.
        if (config_.densify_enabled && iterations_ > 0 && iterations_ % config_.densify.interval == 0)
            densify();
        const KeyframeId id = config_.scheduler_mode == SchedulerMode::adaptive
                                  ? scheduler_.select()
                                  : scheduler_.select_uniform_baseline();
        Frame& f = frames_[index_.at(id)];
        const Keyframe& kf = f.keyframe;

        const auto render = rasterize_forward<float>(map_, kf.camera, raster_);
        const LossBreakdown loss =
            training_loss(render.image, kf.image, map_, config_.lambda_ssim, config_.lambda_o);
        ParamGrads grads = backward(config_.backward_mode, render, map_, kf.camera, loss.grad_image);
        for (std::size_t i = 0; i < grads.size(); ++i)
            grads.primitives[i].opacity_logit += loss.grad_opacity_logit[i];
        accumulate_grad_stats(map_, grads);
        optimizer_.step(map_, grads);

        if (config_.scheduler_mode == SchedulerMode::adaptive) scheduler_.record_result(id, loss.total);
        ++f.iterations;
        f.last_loss = loss.total;
        ++iterations_;
    }

    void densify() {
        const auto res = densify_and_prune(map_, config_.densify, extent(), rng_);
        optimizer_.resize_for_densify(res.survivors, res.n_new);
        ++densify_events_;
        if (log_)
            *log_ << "iter " << iterations_ << ": densify +" << res.cloned << " cloned +" << res.split
                  << " split -" << res.pruned << " pruned -> " << map_.size() << " primitives\n";
    }

    TrainConfig config_;
    RasterOptions raster_;
    KeyframeScheduler scheduler_;
    Optimizer optimizer_;
    std::mt19937_64 rng_;
    std::ostream* log_;
    GaussianMap map_;
    std::vector<Frame> frames_;
    std::unordered_map<KeyframeId, std::size_t> index_;
    std::uint64_t iterations_ = 0;
    std::size_t densify_events_ = 0;
    bool have_bounds_ = false;
    Eigen::Vector3d lo_ = Eigen::Vector3d::Zero();
    Eigen::Vector3d hi_ = Eigen::Vector3d::Zero();
};

}  // namespace

TrainResult run_stream(KeyframeSource& source, const TrainConfig& config, std::ostream* log) {
    config.validate();
    BoundedQueue<Keyframe> queue(config.queue_capacity);
    std::exception_ptr source_error;
    std::thread producer([&] {
        try {
            while (auto kf = source.next())
                if (!queue.push(std::move(*kf))) break;
        } catch (...) {
            source_error = std::current_exception();
        }
        queue.close();
    });

    const auto start = Clock::now();
    Trainer trainer(config, log);
    std::size_t arrivals = 0;
    try {
        while (auto kf = queue.pop()) {
            trainer.arrive(std::move(*kf));
            ++arrivals;
        }
    } catch (...) {
        queue.close();
        producer.join();
        throw;
    }
    producer.join();
    if (source_error) std::rethrow_exception(source_error);
    if (arrivals == 0) throw InvalidParameter("the keyframe stream is empty");
    trainer.run_iterations(config.refine_iterations);
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return trainer.finish(seconds);
}

std::vector<Image> render_trajectory(const GaussianMap& map, const std::vector<Camera>& cameras,
                                     const RasterOptions& options) {
    RasterOptions o = options;
    o.checkpointing = false;
    std::vector<Image> out;
    out.reserve(cameras.size());
    for (const auto& cam : cameras) out.push_back(rasterize_forward<double>(map, cam, o).image);
    return out;
}

void write_report_csv(std::ostream& out, const TrainReport& report) {
    char buf[256];
    out << "keyframe_id,iters,last_loss,psnr,ssim\n";
    double loss_sum = 0.0;
    for (const auto& k : report.keyframes) {
        std::snprintf(buf, sizeof buf, "%u,%llu,%.9g,%.6f,%.6f\n", k.id,
                      static_cast<unsigned long long>(k.iterations), k.last_loss, k.psnr, k.ssim);
        out << buf;
        loss_sum += k.last_loss;
    }
    const double n = report.keyframes.empty() ? 1.0 : double(report.keyframes.size());
    std::snprintf(buf, sizeof buf, "all,%llu,%.9g,%.6f,%.6f\n",
                  static_cast<unsigned long long>(report.total_iterations), loss_sum / n,
                  report.mean_psnr(), report.mean_ssim());
    out << buf;
}

}  // namespace gsalign
