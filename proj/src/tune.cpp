// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/tune.hpp"

#include <stdexcept>

namespace detoxlab {

TuneResult tune_grid(const std::vector<TunePoint>& grid, const TuneEvalFn& evaluate, double ppl_ceiling) {
    if (grid.empty()) throw std::invalid_argument("tune_grid: empty grid");
    TuneResult result;
    result.ppl_ceiling = ppl_ceiling;
    bool found = false;
    for (const auto& point : grid) {
        TuneRow row;
        row.point = point;
        row.eval = evaluate(point);
        row.feasible = ppl_ceiling <= 0.0 || row.eval.ppl <= ppl_ceiling;
        result.table.push_back(row);
        if (!row.feasible) continue;
        if (!found || row.eval.tp < result.table[result.chosen].eval.tp) {
            result.chosen = result.table.size() - 1;
            found = true;
        }
    }
    if (!found) {
        throw std::runtime_error("tune_grid: no grid point satisfies the perplexity ceiling");
    }
    return result;
}

} // namespace detoxlab
