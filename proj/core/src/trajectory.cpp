#include "resfed/trajectory.hpp"

#include "resfed/errors.hpp"

namespace resfed {

void Trajectory::push(const ParamVector& params) {
    if (!entries_.empty() && entries_.front().size() != params.size())
        throw ShapeError("trajectory push: entry shape mismatch");
    if (capacity_ == 0) return; // window 0 keeps no history
    entries_.push_back(params);
    if (entries_.size() > capacity_) entries_.pop_front();
}

const ParamVector& Trajectory::from_newest(size_t i) const {
    if (i >= entries_.size())
        throw InsufficientHistoryError("trajectory holds only " +
                                       std::to_string(entries_.size()) +
                                       " entries");
    return entries_[entries_.size() - 1 - i];
}

ParamVector predict(const Trajectory& lead, const Trajectory& base,
                    const ParamVector& current, const PredictorConfig& config) {
    size_t T = config.window;
    if (T == 0) return current;
    if (lead.size() < T || base.size() < T)
        throw InsufficientHistoryError(
            "predict: window " + std::to_string(T) + " needs " +
            std::to_string(T) + " entries, have " + std::to_string(lead.size()) +
            "/" + std::to_string(base.size()));
    for (size_t tau = 1; tau <= T; ++tau) {
        check_same_shape(lead.from_newest(tau - 1), current);
        check_same_shape(base.from_newest(tau - 1), current);
    }

    ParamVector out = current;
    for (size_t i = 0; i < out.size(); ++i) {
        float acc = current.values[i];
        for (size_t tau = T; tau >= 1; --tau) {
            float coef = float(T - tau + 1);
            if ((T - tau) % 2 == 1) coef = -coef;
            float diff = lead.from_newest(tau - 1).values[i] -
                         base.from_newest(tau - 1).values[i];
            acc += coef * diff;
        }
        out.values[i] = acc;
    }
    return out;
}

ParamVector residual(const ParamVector& actual, const ParamVector& predicted) {
    return sub(actual, predicted);
}

ParamVector recover(const ParamVector& predicted, const ParamVector& received) {
    return add(predicted, received);
}

} // namespace resfed
