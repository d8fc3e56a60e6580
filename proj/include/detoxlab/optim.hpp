// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "detoxlab/param_vector.hpp"

namespace detoxlab {

enum class OptimizerKind { sgd, adamw };

OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adamw;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.0;
    double epsilon = 1e-8;

    void validate() const;
};

// First/second moment estimates plus the bias-correction step counter.
// Empty state means "fresh optimizer".
struct OptimizerState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
};

// One optimizer step, in place. SGD: p -= lr * g, exactly. AdamW follows the
// decoupled-weight-decay recurrence with bias correction. Throws on layout
// mismatch and on non-finite gradients.
void optimizer_step(ParamVector& params, const ParamVector& grads, const OptimizerConfig& cfg,
                    OptimizerState& state);

} // namespace detoxlab
