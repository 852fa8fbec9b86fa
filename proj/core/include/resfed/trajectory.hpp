#pragma once

#include <cstddef>
#include <deque>

#include "resfed/param_vector.hpp"

namespace resfed {

/// Sliding-window predictor configuration. window 0 = stationary,
/// window 1 = linear.
struct PredictorConfig {
    size_t window = 1;
};

/// Bounded FIFO of model snapshots. Pushing at capacity evicts the oldest.
/// All entries share one shape.
class Trajectory {
public:
    explicit Trajectory(size_t capacity = 0) : capacity_(capacity) {}

    size_t capacity() const { return capacity_; }
    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    void push(const ParamVector& params);

    /// Entry counted from the newest: from_newest(0) is the latest push.
    const ParamVector& from_newest(size_t i) const;

    /// Oldest-first iteration.
    const std::deque<ParamVector>& entries() const { return entries_; }

    bool operator==(const Trajectory& o) const {
        return capacity_ == o.capacity_ && entries_ == o.entries_;
    }

private:
    size_t capacity_;
    std::deque<ParamVector> entries_;
};

/// Sliding-window model prediction.
///
/// window 0 returns `current` bit-identically. For window T >= 1:
///   prediction = current + sum_{tau=1..T} (-1)^(T-tau) (T-tau+1)
///                          (lead[tau] - base[tau])
/// where tau=1 is the newest entry of each trajectory. The sum runs
/// tau = T down to 1 in 32-bit arithmetic, elementwise in ascending index
/// order, so identical inputs give bit-identical output.
ParamVector predict(const Trajectory& lead, const Trajectory& base,
                    const ParamVector& current, const PredictorConfig& config);

/// r = actual - predicted, elementwise.
ParamVector residual(const ParamVector& actual, const ParamVector& predicted);

/// predicted + received, elementwise in ascending index order. Both sender
/// and receiver cache this exact expression, which makes trajectory
/// synchronization bit-exact by construction.
ParamVector recover(const ParamVector& predicted, const ParamVector& received);

} // namespace resfed
