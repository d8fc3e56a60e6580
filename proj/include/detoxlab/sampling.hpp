// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "detoxlab/logit_provider.hpp"

namespace detoxlab {

// Evaluation-time generation protocol.
struct SamplerConfig {
    double nucleus_p = 0.9;
    double temperature = 1.0;
    int max_new_tokens = 20;
    int num_continuations = 25;
    std::uint64_t seed = 0;
};

// Distillation-time sampling protocol. The prompt holds tokens following the
// implicit end-of-sequence start; empty means "prompted with eos alone".
struct ContrastiveConfig {
    double alpha = 0.1;
    int max_length = 256;
    int num_sequences = 640;
    std::vector<int> prompt;
    std::uint64_t seed = 0;
};

// s[i] = base_lp[i] - toxic_lp[i], exactly.
std::vector<double> contrastive_scores(const std::vector<double>& base_lp,
                                       const std::vector<double>& toxic_lp);

// Adaptive plausibility constraint: scores survive where the base probability
// is >= alpha * max base probability, else -inf. The base argmax (including
// ties) always survives.
std::vector<double> plausibility_mask(const std::vector<double>& scores,
                                      const std::vector<double>& base_lp, double alpha);

// Keeps the smallest set of highest-probability tokens with cumulative
// probability >= p, masking the rest to -inf; kept entries are returned
// unchanged (which makes the filter idempotent) and are renormalized by the
// softmax at sampling time. Always keeps at least one token.
std::vector<double> nucleus_filter(const std::vector<double>& logprobs, double p);

// (1+beta) * base_lp - beta * toxic_lp; beta = 0 reduces to base_lp.
std::vector<double> dexperts_scores(const std::vector<double>& base_lp,
                                    const std::vector<double>& toxic_lp, double beta);

// Softmax over the finite entries of scores / temperature. Masked (-inf)
// entries get probability exactly 0. Throws when no entry is finite.
std::vector<double> score_distribution(const std::vector<double>& scores, double temperature);

// Subtract logsumexp over finite entries, turning masked scores into
// normalized log-probabilities.
std::vector<double> log_renormalize(const std::vector<double>& scores);

// Inverse-CDF draw from score_distribution(scores, temperature) using a
// uniform u in [0,1); index-order walk makes it fully deterministic.
int sample_next(const std::vector<double>& scores, double temperature, double u);

// Contrastive-decoding scorer stack: softmax of plausibility-masked
// contrastive scores, exposed as a LogitProvider so it can be wrapped or
// sampled like any model. Distillation pipelines use this type; nucleus
// filtering is reserved for evaluation-time generation.
class ContrastiveProvider : public LogitProvider {
public:
    ContrastiveProvider(const LogitProvider& base, const LogitProvider& toxic, double alpha);

    int vocab_size() const override { return base_->vocab_size(); }
    int eos_id() const override { return base_->eos_id(); }
    int context_limit() const override;

protected:
    std::vector<double> logprobs_impl(const std::vector<int>& prefix) const override;

private:
    const LogitProvider* base_;
    const LogitProvider* toxic_;
    double alpha_;
};

// DExperts (anti-expert only): softmax((1+beta) base - beta toxic).
class DExpertsProvider : public LogitProvider {
public:
    DExpertsProvider(const LogitProvider& base, const LogitProvider& toxic, double beta);

    int vocab_size() const override { return base_->vocab_size(); }
    int eos_id() const override { return base_->eos_id(); }
    int context_limit() const override;

protected:
    std::vector<double> logprobs_impl(const std::vector<int>& prefix) const override;

private:
    const LogitProvider* base_;
    const LogitProvider* toxic_;
    double beta_;
};

// Evaluation generation: num_continuations continuations of up to
// max_new_tokens each, nucleus-filtered at cfg.nucleus_p, stopping early at
// eos (the terminal eos is not part of the continuation). Deterministic per
// seed; continuation i at step t draws from the keyed stream (seed, i, t).
std::vector<std::vector<int>> generate(const LogitProvider& model, const std::vector<int>& prompt,
                                       const SamplerConfig& cfg);

// Distillation sampling: num_sequences sequences of up to max_length tokens
// drawn from the scorer's own distribution (plain softmax, temperature 1, no
// nucleus). A sequence that stops at eos keeps the terminal eos token.
std::vector<std::vector<int>> sample_distillation(const LogitProvider& scorer,
                                                  const ContrastiveConfig& cfg);

} // namespace detoxlab
