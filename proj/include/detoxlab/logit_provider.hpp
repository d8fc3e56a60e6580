// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "detoxlab/autodiff.hpp"
#include "detoxlab/param_vector.hpp"
#include "detoxlab/tokenizer.hpp"

namespace detoxlab {

// The one contract everything decodes against: prefix of token ids ->
// next-token log-probabilities. Sequences implicitly start after <eos>, so an
// empty prefix is valid. Providers are immutable for inference and shareable
// across threads.
class LogitProvider {
public:
    virtual ~LogitProvider() = default;

    virtual int vocab_size() const = 0;
    virtual int eos_id() const = 0;
    // Prefixes must be strictly shorter than this. Generation slides its
    // window before hitting the limit; longer prefixes are an error.
    virtual int context_limit() const = 0;

    // Validates the prefix (length, token range) then defers to the model.
    // Output satisfies logsumexp == 0 within 1e-10.
    std::vector<double> next_logprobs(const std::vector<int>& prefix) const;

protected:
    virtual std::vector<double> logprobs_impl(const std::vector<int>& prefix) const = 0;
};

// log p(x) = sum_t log p(x_t | x_<t) via the chain rule, conditioning on the
// implicit <eos> start; prefixes longer than the provider's context limit are
// slid from the left.
double sequence_logprob(const LogitProvider& model, const std::vector<int>& x);

// Trainable models additionally expose their parameters as a flat vector and
// can build an autodiff loss graph over token blocks.
class TrainableLM : public LogitProvider {
public:
    struct LossGraph {
        ad::Var loss;                  // batch mean of per-block token-NLL sums
        std::vector<ad::Var> param_vars; // in ParamVector layout order
        std::size_t predicted_tokens = 0;
    };

    virtual const Tokenizer& tokenizer() const = 0;
    virtual ParamVector params() const = 0;
    virtual void set_params(const ParamVector& pv) = 0;
    virtual LossGraph loss_graph(const std::vector<std::vector<int>>& blocks) const = 0;

    // Gradients of the graph's loss in layout order; parameters the loss never
    // reached contribute exact zeros.
    ParamVector grads_from(const LossGraph& g) const;
};

} // namespace detoxlab
