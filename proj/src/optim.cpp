// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace detoxlab {

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adamw") return OptimizerKind::adamw;
    throw std::invalid_argument("unknown optimizer kind: " + s);
}

std::string to_string(OptimizerKind k) {
    return k == OptimizerKind::sgd ? "sgd" : "adamw";
}

void OptimizerConfig::validate() const {
    // SGD admits a signed step so that a +lr step can be undone by a -lr
    // step; AdamW state updates assume a positive rate.
    if (kind == OptimizerKind::sgd) {
        if (!std::isfinite(learning_rate) || learning_rate == 0.0) {
            throw std::invalid_argument("optimizer: sgd learning_rate must be finite and nonzero");
        }
    } else if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("optimizer: learning_rate must be positive");
    }
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw std::invalid_argument("optimizer: beta1 must be in (0,1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw std::invalid_argument("optimizer: beta2 must be in (0,1)");
    if (weight_decay < 0.0) throw std::invalid_argument("optimizer: weight_decay must be nonnegative");
    if (!(epsilon > 0.0)) throw std::invalid_argument("optimizer: epsilon must be positive");
}

void optimizer_step(ParamVector& params, const ParamVector& grads, const OptimizerConfig& cfg,
                    OptimizerState& state) {
    cfg.validate();
    check_same_layout(params, grads, "optimizer_step");
    for (double g : grads.values) {
        if (!std::isfinite(g)) throw std::runtime_error("optimizer_step: non-finite gradient");
    }

    const std::size_t n = params.values.size();
    if (cfg.kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < n; ++i) params.values[i] -= cfg.learning_rate * grads.values[i];
        ++state.step;
        return;
    }

    if (state.m.empty()) {
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
        state.step = 0;
    }
    if (state.m.size() != n || state.v.size() != n) {
        throw std::invalid_argument("optimizer_step: state size does not match parameters");
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads.values[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        // Decoupled weight decay: applied directly to the parameter, not the gradient.
        params.values[i] -= cfg.learning_rate * (mhat / (std::sqrt(vhat) + cfg.epsilon) +
                                                 cfg.weight_decay * params.values[i]);
    }
}

} // namespace detoxlab
