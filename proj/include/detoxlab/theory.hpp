// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "detoxlab/logit_provider.hpp"

namespace detoxlab {

// One measured point of the first-order story: the exact contrastive score
// s(x) against its linear proxy g(x) = (-tau) . grad_theta log p_base(x).
struct AlignmentRecord {
    std::vector<int> sequence;
    double contrastive_score = 0.0; // s(x)
    double linear_proxy = 0.0;      // g(x)
    double tau_scale = 1.0;         // c, when the toxic model is base + c*tau
};

enum class SimilarityMeasure { dot, cosine, mse };
SimilarityMeasure similarity_from_string(const std::string& s);

// grad_theta log p_model(x) as a flat vector (one backward pass).
ParamVector sequence_logprob_grad(const TrainableLM& model, const std::vector<int>& x);

// s(x) exactly via sequence log-probabilities; g(x) via one backward pass on
// the base model and an inner product with -tau.
AlignmentRecord taylor_alignment(const TrainableLM& base, const TrainableLM& toxic,
                                 const std::vector<int>& x, double tau_scale = 1.0);

// Gradient-matching objective f(x) = l(theta_star - theta, grad log p(x)).
// With the dot-product measure, -f(x) equals s(x) up to the Taylor remainder.
double gradient_matching_objective(const TrainableLM& model, const ParamVector& theta_star,
                                   const std::vector<int>& x, SimilarityMeasure measure);

// Central finite differences, coordinate-wise. Micro models only.
ParamVector finite_diff_gradient(const std::function<double(const ParamVector&)>& fn,
                                 const ParamVector& params, double h);

double spearman_rank_correlation(const std::vector<double>& a, const std::vector<double>& b);

// Remainder-scaling study: for each scale c, build toxic = base + c*tau and
// measure E(c) = mean |s - g| plus rank correlation over the sequences.
// Successive halvings of c should shrink E by ~4x (second-order remainder).
struct ScalingStudy {
    std::vector<double> scales;
    std::vector<double> mean_abs_error;    // E(c), aligned with scales
    std::vector<double> error_ratio;       // E(c_k) / E(c_{k+1})
    std::vector<double> rank_correlation;  // spearman(s, g) at each scale
    std::vector<std::vector<AlignmentRecord>> records; // per scale
};

// `make_toxic` must return a model of the same layout with parameters
// base + c * tau; the default handles any TrainableLM via set_params.
ScalingStudy taylor_scaling_study(const TrainableLM& base, TrainableLM& scratch, const ParamVector& tau,
                                  const std::vector<std::vector<int>>& sequences,
                                  const std::vector<double>& scales);

// Per-token variant of the alignment measurement for one sequence: s_t and
// g_t per position (the alignment statement is sequence-level while decoding
// is token-incremental, so both granularities get measured).
struct PerTokenAlignment {
    std::vector<double> s; // per-position contrastive scores
    std::vector<double> g; // per-position linear proxies
};
PerTokenAlignment per_token_alignment(const TrainableLM& base, const TrainableLM& toxic,
                                      const std::vector<int>& x);

// Cosine between the parameter delta of one fine-tuning step on `sequences`
// (SGD, learning rate lr) and -tau. Reported, not thresholded.
double detox_step_alignment(const TrainableLM& base, TrainableLM& scratch, const ParamVector& tau,
                            const std::vector<std::vector<int>>& sequences, double lr);

} // namespace detoxlab
