#include "gsalign/scheduler.hpp"
#include "gsalign/error.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace gsalign {

KeyframeScheduler::KeyframeScheduler(SchedulerParams params) : params_(params), rng_(params.seed) {
    if (params_.d < 1) throw InvalidParameter("scheduler d must be >= 1");
    if (params_.initial_budget < 1) throw InvalidParameter("scheduler initial budget must be >= 1");
}

void KeyframeScheduler::add_keyframe(KeyframeId id) {
    if (contains(id)) throw InvalidParameter("keyframe " + std::to_string(id) + " already in the pool");
    position_.emplace(id, ids_.size());
    ids_.push_back(id);
    remaining_.push_back(params_.initial_budget);
    last_loss_.push_back(kUnseenLoss);
}

KeyframeId KeyframeScheduler::select() {
    if (empty()) throw InvalidParameter("cannot select from an empty keyframe pool");
    std::size_t eligible = 0;
    for (int r : remaining_) eligible += r > 0 ? 1 : 0;
    if (eligible == 0) {
        refill();
        eligible = ids_.size();
    }
    std::uniform_int_distribution<std::size_t> pick(0, eligible - 1);
    std::size_t target = pick(rng_);
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (remaining_[i] <= 0) continue;
        if (target == 0) return ids_[i];
        --target;
    }
    throw Error("scheduler eligibility bookkeeping is inconsistent");
}

KeyframeId KeyframeScheduler::select_uniform_baseline() {
    if (empty()) throw InvalidParameter("cannot select from an empty keyframe pool");
    std::uniform_int_distribution<std::size_t> pick(0, ids_.size() - 1);
    return ids_[pick(rng_)];
}

void KeyframeScheduler::record_result(KeyframeId id, double loss) {
    const std::size_t i = position_of(id);
    if (remaining_[i] <= 0)
        throw InvalidParameter("keyframe " + std::to_string(id) +
                               " has no remaining budget; record_result must follow select");
    --remaining_[i];
    last_loss_[i] = loss;
}

std::size_t KeyframeScheduler::top_count() const {
    return std::max<std::size_t>(1, ids_.size() / static_cast<std::size_t>(params_.d));
}

void KeyframeScheduler::refill() {
    if (empty()) return;
    std::vector<std::size_t> order(ids_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (last_loss_[a] != last_loss_[b]) return last_loss_[a] > last_loss_[b];
        return a > b;
    });
    const std::size_t top = std::min(top_count(), ids_.size());
    std::fill(remaining_.begin(), remaining_.end(), 1);
    for (std::size_t k = 0; k < top; ++k) remaining_[order[k]] = 2;
    ++refills_;
}

int KeyframeScheduler::remaining_of(KeyframeId id) const { return remaining_[position_of(id)]; }

double KeyframeScheduler::last_loss_of(KeyframeId id) const { return last_loss_[position_of(id)]; }

std::size_t KeyframeScheduler::position_of(KeyframeId id) const {
    const auto it = position_.find(id);
    if (it == position_.end()) throw InvalidParameter("unknown keyframe " + std::to_string(id));
    return it->second;
}

}  // namespace gsalign
