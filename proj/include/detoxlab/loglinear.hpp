// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "detoxlab/logit_provider.hpp"
#include "detoxlab/tensor.hpp"

namespace detoxlab {

// Single-softmax-layer model over bigram contexts: one V x V logit table,
// p(x_t | x_{t-1}) = softmax(table[x_{t-1}]). Small enough for exact
// finite-difference gradients and analytically tame Taylor remainders, which
// is exactly what the alignment studies need.
class LogLinearLM : public TrainableLM {
public:
    LogLinearLM(Tokenizer tok, std::uint64_t init_seed, double init_std = 0.1);
    LogLinearLM(Tokenizer tok, Tensor table);

    int vocab_size() const override { return static_cast<int>(table_.rows()); }
    int eos_id() const override { return tok_.eos_id(); }
    int context_limit() const override { return 1 << 28; }

    const Tokenizer& tokenizer() const override { return tok_; }
    ParamVector params() const override;
    void set_params(const ParamVector& pv) override;
    LossGraph loss_graph(const std::vector<std::vector<int>>& blocks) const override;

    const Tensor& table() const { return table_; }

protected:
    std::vector<double> logprobs_impl(const std::vector<int>& prefix) const override;

private:
    Tokenizer tok_;
    Tensor table_; // (V,V) logits, row = previous token
};

} // namespace detoxlab
