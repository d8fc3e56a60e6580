// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/logit_provider.hpp"

#include <cmath>
#include <stdexcept>

namespace detoxlab {

std::vector<double> LogitProvider::next_logprobs(const std::vector<int>& prefix) const {
    if (static_cast<int>(prefix.size()) >= context_limit()) {
        throw std::invalid_argument("next_logprobs: prefix too long (" + std::to_string(prefix.size()) +
                                    " tokens, context limit " + std::to_string(context_limit()) + ")");
    }
    const int v = vocab_size();
    for (int id : prefix) {
        if (id < 0 || id >= v) {
            throw std::out_of_range("next_logprobs: unknown token id " + std::to_string(id));
        }
    }
    return logprobs_impl(prefix);
}

double sequence_logprob(const LogitProvider& model, const std::vector<int>& x) {
    if (x.empty()) throw std::invalid_argument("sequence_logprob: empty sequence");
    const std::size_t ctx = static_cast<std::size_t>(model.context_limit()) - 1; // longest usable prefix
    double total = 0.0;
    std::vector<int> window;
    for (std::size_t t = 0; t < x.size(); ++t) {
        const std::size_t start = t > ctx ? t - ctx : 0;
        window.assign(x.begin() + static_cast<std::ptrdiff_t>(start), x.begin() + static_cast<std::ptrdiff_t>(t));
        total += model.next_logprobs(window)[static_cast<std::size_t>(x[t])];
    }
    return total;
}

ParamVector TrainableLM::grads_from(const LossGraph& g) const {
    ParamVector out = params();
    std::size_t off = 0;
    for (std::size_t i = 0; i < g.param_vars.size(); ++i) {
        const ad::Var& p = g.param_vars[i];
        const std::size_t n = p->value.numel();
        if (p->has_grad()) {
            for (std::size_t j = 0; j < n; ++j) out.values[off + j] = p->grad[j];
        } else {
            for (std::size_t j = 0; j < n; ++j) out.values[off + j] = 0.0;
        }
        off += n;
    }
    if (off != out.values.size()) {
        throw std::logic_error("grads_from: graph parameters do not cover the layout");
    }
    return out;
}

} // namespace detoxlab
