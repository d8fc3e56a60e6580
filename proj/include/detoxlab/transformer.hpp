// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "detoxlab/logit_provider.hpp"
#include "detoxlab/tensor.hpp"

namespace detoxlab {

struct TransformerConfig {
    int vocab = 0;
    int context = 64;
    int layers = 2;
    int heads = 2;
    int d_model = 64;
    bool tied_embeddings = true; // output projection shares the token embedding
    double init_std = 0.02;
    double ln_eps = 1e-5;

    void validate() const;
    bool operator==(const TransformerConfig&) const = default;
};

// Pre-LN GPT-style causal transformer, dense f64 throughout. Inference runs
// on a graph-free fast path; training builds an autodiff graph per block.
class TransformerLM : public TrainableLM {
public:
    // Gaussian init keyed by seed; biases zero, layer-norm gains one.
    TransformerLM(TransformerConfig cfg, Tokenizer tok, std::uint64_t init_seed);
    TransformerLM(TransformerConfig cfg, Tokenizer tok, const ParamVector& pv);

    const TransformerConfig& config() const { return cfg_; }

    int vocab_size() const override { return cfg_.vocab; }
    int eos_id() const override { return tok_.eos_id(); }
    int context_limit() const override { return cfg_.context; }

    const Tokenizer& tokenizer() const override { return tok_; }
    ParamVector params() const override;
    void set_params(const ParamVector& pv) override;
    LossGraph loss_graph(const std::vector<std::vector<int>>& blocks) const override;

    // Raw logits for every position of `tokens` (no implicit <eos>); the
    // causality tests inspect all rows. tokens.size() must be <= context.
    Tensor forward_logits(const std::vector<int>& tokens) const;

    // Graph-building pieces, exposed so wrappers (LM-Steer training) can
    // splice in a transformed input embedding while freezing the base.
    struct GraphWeights {
        ad::Var tok_emb, pos_emb;
        std::vector<std::vector<ad::Var>> layers; // 12 vars per layer, layout order
        ad::Var lnf_g, lnf_b;
        ad::Var head; // tok_emb when tied
        std::vector<ad::Var> ordered;
    };
    // trainable=false wraps the weights as constants (no gradients).
    GraphWeights graph_weights(bool trainable) const;
    // Per-block token-NLL sum; `input_table` supplies the token embedding
    // table used for the input gather (normally w.tok_emb).
    ad::Var block_nll(const GraphWeights& w, const std::vector<int>& block,
                      const ad::Var& input_table) const;

protected:
    std::vector<double> logprobs_impl(const std::vector<int>& prefix) const override;

private:
    struct LayerWeights {
        Tensor ln1_g, ln1_b;
        Tensor wqkv, bqkv; // (D,3D), (3D)
        Tensor wo, bo;     // (D,D), (D)
        Tensor ln2_g, ln2_b;
        Tensor wfc, bfc;     // (D,4D), (4D)
        Tensor wproj, bproj; // (4D,D), (D)
    };

    ParamVector::Layout layout() const;
    // Hidden states after the final layer norm, shape (T,D).
    Tensor forward_hidden(const std::vector<int>& tokens) const;

    TransformerConfig cfg_;
    Tokenizer tok_;
    Tensor tok_emb_; // (V,D)
    Tensor pos_emb_; // (L,D)
    std::vector<LayerWeights> layers_;
    Tensor lnf_g_, lnf_b_;
    Tensor lm_head_; // (V,D), only when untied
};

} // namespace detoxlab
