#pragma once

// Generic concentration loop shared by the trimmed estimators: estimate on the
// kept rows, score every row, keep the best ceil(N(1 - gamma)), repeat until the
// discarded set is the same on two consecutive iterations. A step that would
// lower the objective ends the loop at the previous state instead.

#include <functional>
#include <vector>

#include "robsel/common.hpp"

namespace robsel {

template <class State>
struct ConcentrationResult {
    State state;
    TrimmingState keep;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    bool cycled = false;
    bool stopped_on_decrease = false;
    /// Objective after each iteration whose kept set has the exact trimmed size.
    std::vector<double> trace;
};

template <class State>
ConcentrationResult<State> concentrate(TrimmingState keep, double gamma, int max_iter,
                                       const std::function<State(const TrimmingState&)>& estimate,
                                       const std::function<std::vector<double>(const State&)>& criterion,
                                       const std::function<double(const State&, const TrimmingState&)>& objective) {
    struct Visit {
        TrimmingState keep;
        State state;
        double objective;
    };
    std::vector<Visit> history;
    ConcentrationResult<State> out;
    for (int iter = 1; iter <= max_iter; ++iter) {
        State state = estimate(keep);
        const double obj = objective(state, keep);
        if (keep.exact() && !history.empty() && history.back().keep.exact() && obj < history.back().objective) {
            out.state = std::move(history.back().state);
            out.keep = std::move(history.back().keep);
            out.objective = history.back().objective;
            out.stopped_on_decrease = true;
            return out;
        }
        if (keep.exact()) out.trace.push_back(obj);
        out.iterations = iter;

        const std::vector<double> scores = criterion(state);
        TrimmingState next = trim_lowest(scores, gamma);
        if (next == keep) {
            out.state = std::move(state);
            out.keep = std::move(keep);
            out.objective = obj;
            out.converged = true;
            return out;
        }
        history.push_back({keep, std::move(state), obj});
        for (std::size_t j = 0; j < history.size(); ++j) {
            if (!(history[j].keep == next)) continue;
            // Cycle: keep the highest-objective state on it, earliest on ties.
            std::size_t best = j;
            for (std::size_t k = j + 1; k < history.size(); ++k)
                if (history[k].objective > history[best].objective) best = k;
            out.state = std::move(history[best].state);
            out.keep = std::move(history[best].keep);
            out.objective = history[best].objective;
            out.cycled = true;
            return out;
        }
        keep = std::move(next);
    }
    out.state = estimate(keep);
    out.objective = objective(out.state, keep);
    if (keep.exact() && !history.empty() && history.back().keep.exact() && out.objective < history.back().objective) {
        out.state = std::move(history.back().state);
        out.keep = std::move(history.back().keep);
        out.objective = history.back().objective;
        out.stopped_on_decrease = true;
        return out;
    }
    if (keep.exact()) out.trace.push_back(out.objective);
    out.keep = std::move(keep);
    return out;
}

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers. Results are written by index,
/// so the outcome does not depend on scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace robsel
