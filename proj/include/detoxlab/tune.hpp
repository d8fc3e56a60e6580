// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace detoxlab {

// One grid point: named hyperparameter values (e.g. {steps: 3000, lr_preset: 1}).
struct TunePoint {
    std::map<std::string, double> params;
};

struct TuneEval {
    double tp = 0.0;  // selection metric: validation TP averaged across domains
    double ppl = 0.0; // fluency guard
};

struct TuneRow {
    TunePoint point;
    TuneEval eval;
    bool feasible = true;
};

struct TuneResult {
    std::vector<TuneRow> table; // one row per grid point, in grid order
    std::size_t chosen = 0;     // index into table
    double ppl_ceiling = 0.0;   // <= 0 means unconstrained
};

using TuneEvalFn = std::function<TuneEval(const TunePoint&)>;

// Evaluates every grid point and picks the feasible point with minimal TP
// (ties keep the earliest). ppl_ceiling <= 0 disables the constraint (the
// unidetox/samples path); otherwise infeasible points are kept in the table
// but never chosen, and an empty feasible set is an error, not a silent
// relaxation.
TuneResult tune_grid(const std::vector<TunePoint>& grid, const TuneEvalFn& evaluate, double ppl_ceiling);

} // namespace detoxlab
