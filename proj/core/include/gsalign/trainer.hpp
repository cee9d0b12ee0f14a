#pragma once

#include "gsalign/densify.hpp"
#include "gsalign/gaussian_map.hpp"
#include "gsalign/keyframe.hpp"
#include "gsalign/optimizer.hpp"
#include "gsalign/rasterizer.hpp"
#include "gsalign/scheduler.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gsalign {

/// What bounds the optimization that follows each keyframe arrival.
enum class BudgetKind { iterations, wall_ms };

struct TrainConfig {
    BackwardMode backward_mode = BackwardMode::splat;
    SchedulerMode scheduler_mode = SchedulerMode::adaptive;
    double lambda_ssim = 0.2;
    double lambda_o = 0.001;
    int d = 4;
    int r0 = 8;
    bool densify_enabled = true;
    DensifyConfig densify;
    OptimizerConfig optimizer;
    BudgetKind budget_kind = BudgetKind::iterations;
    /// Iterations or milliseconds per arrival, depending on budget_kind.
    double budget = 100.0;
    /// Total-iteration cap across the whole run; 0 means none.
    std::uint64_t max_iterations = 0;
    /// Extra iterations after the stream ends.
    std::uint64_t refine_iterations = 0;
    std::uint64_t seed = 0;
    int sh_degree = 3;
    /// Deterministic reductions; requires an iteration budget.
    bool deterministic = false;
    int num_threads = 0;
    std::size_t queue_capacity = 4;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    void validate() const;
    RasterOptions raster_options() const;
};

const char* to_string(BackwardMode mode);
const char* to_string(SchedulerMode mode);
const char* to_string(BudgetKind kind);

struct KeyframeReport {
    KeyframeId id = 0;
    double timestamp = 0.0;
    std::uint64_t iterations = 0;
    /// Total loss at the keyframe's most recent iteration; NaN if never trained.
    double last_loss = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct TrainReport {
    std::vector<KeyframeReport> keyframes;
    std::uint64_t total_iterations = 0;
    double seconds = 0.0;
    double iterations_per_second = 0.0;
    std::size_t final_count = 0;
    std::size_t densify_events = 0;
    double scene_extent = 1.0;
    TrainConfig config;

    double mean_psnr() const;
    double min_psnr() const;
    double mean_ssim() const;
};

struct TrainResult {
    GaussianMap map;
    TrainReport report;
};

/// Streams keyframes from `source` on a producer thread and trains on each arrival.
/// Errors from the source are rethrown on the calling thread.
TrainResult run_stream(KeyframeSource& source, const TrainConfig& config,
                       std::ostream* log = nullptr);

/// Renders one image per camera (double precision, no checkpoints).
std::vector<Image> render_trajectory(const GaussianMap& map, const std::vector<Camera>& cameras,
                                     const RasterOptions& options = {});

/// Report CSV: header "keyframe_id,iters,last_loss,psnr,ssim", one row per keyframe and
/// a final row with keyframe_id "all" holding the total iterations and the means.
void write_report_csv(std::ostream& out, const TrainReport& report);

}  // namespace gsalign
