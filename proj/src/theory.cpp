// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace detoxlab {

SimilarityMeasure similarity_from_string(const std::string& s) {
    if (s == "dot") return SimilarityMeasure::dot;
    if (s == "cosine") return SimilarityMeasure::cosine;
    if (s == "mse") return SimilarityMeasure::mse;
    throw std::invalid_argument("unknown similarity measure: " + s);
}

namespace {

// [eos] + x reproduces the sequence_logprob factorization exactly.
std::vector<int> eos_block(const TrainableLM& model, const std::vector<int>& x) {
    if (x.empty()) throw std::invalid_argument("theory: empty sequence");
    if (static_cast<int>(x.size()) >= model.context_limit()) {
        throw std::invalid_argument("theory: sequence exceeds model context");
    }
    std::vector<int> block;
    block.reserve(x.size() + 1);
    block.push_back(model.eos_id());
    block.insert(block.end(), x.begin(), x.end());
    return block;
}

} // namespace

ParamVector sequence_logprob_grad(const TrainableLM& model, const std::vector<int>& x) {
    auto graph = model.loss_graph({eos_block(model, x)}); // loss = -log p(x)
    ad::backward(graph.loss);
    ParamVector grads = model.grads_from(graph);
    for (double& g : grads.values) {
        if (!std::isfinite(g)) throw std::runtime_error("theory: non-finite gradient");
        g = -g; // grad of +log p
    }
    return grads;
}

AlignmentRecord taylor_alignment(const TrainableLM& base, const TrainableLM& toxic,
                                 const std::vector<int>& x, double tau_scale) {
    const ParamVector base_params = base.params();
    const ParamVector toxic_params = toxic.params();
    check_same_layout(base_params, toxic_params, "taylor_alignment");

    AlignmentRecord rec;
    rec.sequence = x;
    rec.tau_scale = tau_scale;
    rec.contrastive_score = sequence_logprob(base, x) - sequence_logprob(toxic, x);

    const ParamVector tau = param_delta(base_params, toxic_params);
    const ParamVector grad = sequence_logprob_grad(base, x);
    double g = 0.0;
    for (std::size_t i = 0; i < tau.values.size(); ++i) g += -tau.values[i] * grad.values[i];
    rec.linear_proxy = g;
    if (!std::isfinite(rec.contrastive_score) || !std::isfinite(rec.linear_proxy)) {
        throw std::runtime_error("taylor_alignment: non-finite record");
    }
    return rec;
}

double gradient_matching_objective(const TrainableLM& model, const ParamVector& theta_star,
                                   const std::vector<int>& x, SimilarityMeasure measure) {
    const ParamVector theta = model.params();
    check_same_layout(theta, theta_star, "gradient_matching_objective");
    const ParamVector delta = param_delta(theta, theta_star); // theta_star - theta
    const ParamVector grad = sequence_logprob_grad(model, x);

    switch (measure) {
    case SimilarityMeasure::dot:
        return dot(delta, grad);
    case SimilarityMeasure::cosine:
        return cosine_similarity(delta, grad); // throws on zero vectors
    case SimilarityMeasure::mse: {
        double s = 0.0;
        for (std::size_t i = 0; i < delta.values.size(); ++i) {
            const double d = delta.values[i] - grad.values[i];
            s += d * d;
        }
        return s / static_cast<double>(delta.values.size());
    }
    }
    throw std::logic_error("gradient_matching_objective: unreachable");
}

ParamVector finite_diff_gradient(const std::function<double(const ParamVector&)>& fn,
                                 const ParamVector& params, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_gradient: h must be positive");
    ParamVector grads = params;
    ParamVector probe = params;
    for (std::size_t i = 0; i < params.values.size(); ++i) {
        const double orig = params.values[i];
        probe.values[i] = orig + h;
        const double up = fn(probe);
        probe.values[i] = orig - h;
        const double down = fn(probe);
        probe.values[i] = orig;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw std::runtime_error("finite_diff_gradient: non-finite evaluation");
        }
        grads.values[i] = (up - down) / (2.0 * h);
    }
    return grads;
}

double spearman_rank_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw std::invalid_argument("spearman: need two equal-length series of size >= 2");
    }
    auto ranks = [](const std::vector<double>& xs) {
        std::vector<std::size_t> order(xs.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return xs[i] < xs[j]; });
        std::vector<double> r(xs.size());
        std::size_t i = 0;
        while (i < order.size()) {
            std::size_t j = i;
            while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
            const double shared = 0.5 * static_cast<double>(i + j) + 1.0; // average rank for ties
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = shared;
            i = j + 1;
        }
        return r;
    };
    const std::vector<double> ra = ranks(a), rb = ranks(b);
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= static_cast<double>(ra.size());
    mb /= static_cast<double>(rb.size());
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) throw std::invalid_argument("spearman: constant series");
    return cov / std::sqrt(va * vb);
}

ScalingStudy taylor_scaling_study(const TrainableLM& base, TrainableLM& scratch, const ParamVector& tau,
                                  const std::vector<std::vector<int>>& sequences,
                                  const std::vector<double>& scales) {
    if (sequences.empty() || scales.empty()) {
        throw std::invalid_argument("taylor_scaling_study: need sequences and scales");
    }
    const ParamVector base_params = base.params();
    check_same_layout(base_params, tau, "taylor_scaling_study");

    // grad log p_base(x) does not depend on the scale; compute once.
    std::vector<ParamVector> grads;
    grads.reserve(sequences.size());
    std::vector<double> base_lp;
    for (const auto& x : sequences) {
        grads.push_back(sequence_logprob_grad(base, x));
        base_lp.push_back(sequence_logprob(base, x));
    }

    ScalingStudy study;
    study.scales = scales;
    for (double c : scales) {
        ParamVector toxic_params = base_params;
        for (std::size_t i = 0; i < toxic_params.values.size(); ++i) {
            toxic_params.values[i] += c * tau.values[i];
        }
        scratch.set_params(toxic_params);

        std::vector<AlignmentRecord> recs;
        std::vector<double> ss, gs;
        double err_sum = 0.0;
        for (std::size_t i = 0; i < sequences.size(); ++i) {
            AlignmentRecord rec;
            rec.sequence = sequences[i];
            rec.tau_scale = c;
            rec.contrastive_score = base_lp[i] - sequence_logprob(scratch, sequences[i]);
            double g = 0.0;
            for (std::size_t k = 0; k < tau.values.size(); ++k) {
                g += -c * tau.values[k] * grads[i].values[k];
            }
            rec.linear_proxy = g;
            err_sum += std::abs(rec.contrastive_score - rec.linear_proxy);
            ss.push_back(rec.contrastive_score);
            gs.push_back(rec.linear_proxy);
            recs.push_back(std::move(rec));
        }
        study.mean_abs_error.push_back(err_sum / static_cast<double>(sequences.size()));
        study.rank_correlation.push_back(spearman_rank_correlation(ss, gs));
        study.records.push_back(std::move(recs));
    }
    for (std::size_t i = 0; i + 1 < study.mean_abs_error.size(); ++i) {
        study.error_ratio.push_back(study.mean_abs_error[i] / study.mean_abs_error[i + 1]);
    }
    scratch.set_params(base_params);
    return study;
}

PerTokenAlignment per_token_alignment(const TrainableLM& base, const TrainableLM& toxic,
                                      const std::vector<int>& x) {
    const ParamVector tau = param_delta(base.params(), toxic.params());
    PerTokenAlignment out;
    const std::size_t ctx = static_cast<std::size_t>(base.context_limit()) - 1;
    std::vector<int> window;
    for (std::size_t t = 0; t < x.size(); ++t) {
        const std::size_t start = t > ctx ? t - ctx : 0;
        window.assign(x.begin() + static_cast<std::ptrdiff_t>(start), x.begin() + static_cast<std::ptrdiff_t>(t));
        const double s_t = base.next_logprobs(window)[static_cast<std::size_t>(x[t])] -
                           toxic.next_logprobs(window)[static_cast<std::size_t>(x[t])];

        // One-position loss: mask every other target in the block.
        std::vector<int> block;
        block.push_back(base.eos_id());
        block.insert(block.end(), x.begin(), x.begin() + static_cast<std::ptrdiff_t>(t + 1));
        if (static_cast<int>(block.size()) > base.context_limit()) {
            block.erase(block.begin(),
                        block.end() - static_cast<std::ptrdiff_t>(base.context_limit()));
        }
        // Rebuild the block so only the final transition contributes loss:
        // predict block.back() from the rest.
        std::vector<int> prefix_block(block.begin(), block.end());
        auto graph = base.loss_graph({prefix_block});
        // loss_graph sums all transitions; isolate the last one by
        // subtracting the loss over the block without its final token.
        double g_t;
        {
            ad::backward(graph.loss);
            ParamVector grad_full = base.grads_from(graph);
            if (prefix_block.size() > 2) {
                std::vector<int> shorter(prefix_block.begin(), prefix_block.end() - 1);
                auto graph2 = base.loss_graph({shorter});
                ad::backward(graph2.loss);
                ParamVector grad_head = base.grads_from(graph2);
                for (std::size_t i = 0; i < grad_full.values.size(); ++i) {
                    grad_full.values[i] -= grad_head.values[i];
                }
            }
            // grad_full now holds grad of -log p(x_t | ...); flip sign.
            double acc = 0.0;
            for (std::size_t i = 0; i < tau.values.size(); ++i) {
                acc += -tau.values[i] * -grad_full.values[i];
            }
            g_t = acc;
        }
        out.s.push_back(s_t);
        out.g.push_back(g_t);
    }
    return out;
}

double detox_step_alignment(const TrainableLM& base, TrainableLM& scratch, const ParamVector& tau,
                            const std::vector<std::vector<int>>& sequences, double lr) {
    const ParamVector base_params = base.params();
    scratch.set_params(base_params);

    std::vector<std::vector<int>> blocks;
    for (const auto& x : sequences) blocks.push_back(eos_block(base, x));
    auto graph = scratch.loss_graph(blocks);
    ad::backward(graph.loss);
    ParamVector grads = scratch.grads_from(graph);

    ParamVector delta = base_params;
    for (std::size_t i = 0; i < delta.values.size(); ++i) delta.values[i] = -lr * grads.values[i];
    ParamVector neg_tau = tau;
    for (double& v : neg_tau.values) v = -v;
    return cosine_similarity(delta, neg_tau);
}

} // namespace detoxlab
