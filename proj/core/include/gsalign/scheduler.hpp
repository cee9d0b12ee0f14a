#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <unordered_map>
#include <vector>

namespace gsalign {

using KeyframeId = std::uint32_t;

enum class SchedulerMode { adaptive, uniform };

struct SchedulerParams {
    /// Refill divisor: the top max(1, floor(k / d)) losses get the larger budget.
    int d = 4;
    /// Budget given to a keyframe when it joins the pool.
    int initial_budget = 8;
    std::uint64_t seed = 0;
};

/// Loss-prioritized keyframe selection over three parallel pools: keyframe ids, remaining
/// iteration budgets and last observed losses.
class KeyframeScheduler {
public:
    /// Last-loss value of a keyframe that has not been trained yet; ranks above any real loss.
    static constexpr double kUnseenLoss = std::numeric_limits<double>::infinity();

    explicit KeyframeScheduler(SchedulerParams params = {});

    /// Appends a keyframe with the initial budget. Throws InvalidParameter on a duplicate id.
    void add_keyframe(KeyframeId id);

    /// Uniform draw among keyframes with remaining budget, refilling first when all are spent.
    KeyframeId select();

    /// Uniform draw over the whole pool, ignoring budgets and losses.
    KeyframeId select_uniform_baseline();

    /// Consumes one iteration of `id`'s budget and stores its loss. Throws when the budget
    /// is already zero or the id is unknown.
    void record_result(KeyframeId id, double loss);

    /// Reassigns budgets once every keyframe is exhausted: 2 for the top-d_k losses
    /// (ties toward the most recent keyframe), 1 for the rest.
    void refill();

    /// max(1, floor(k / d)) for the current pool size k.
    std::size_t top_count() const;

    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    bool contains(KeyframeId id) const { return position_.count(id) != 0; }
    const std::vector<KeyframeId>& ids() const { return ids_; }
    const std::vector<int>& remaining() const { return remaining_; }
    const std::vector<double>& last_loss() const { return last_loss_; }
    int remaining_of(KeyframeId id) const;
    double last_loss_of(KeyframeId id) const;
    std::uint64_t refill_count() const { return refills_; }
    const SchedulerParams& params() const { return params_; }

private:
    std::size_t position_of(KeyframeId id) const;

    SchedulerParams params_;
    std::mt19937_64 rng_;
    std::vector<KeyframeId> ids_;
    std::vector<int> remaining_;
    std::vector<double> last_loss_;
    std::unordered_map<KeyframeId, std::size_t> position_;
    std::uint64_t refills_ = 0;
};

}  // namespace gsalign
