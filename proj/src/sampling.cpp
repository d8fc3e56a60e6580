// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "detoxlab/rng.hpp"

namespace detoxlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_lengths(const std::vector<double>& a, const std::vector<double>& b, const char* op) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(op) + ": length mismatch " + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()));
    }
}

} // namespace

std::vector<double> contrastive_scores(const std::vector<double>& base_lp,
                                       const std::vector<double>& toxic_lp) {
    check_lengths(base_lp, toxic_lp, "contrastive_scores");
    std::vector<double> s(base_lp.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = base_lp[i] - toxic_lp[i];
    return s;
}

std::vector<double> plausibility_mask(const std::vector<double>& scores,
                                      const std::vector<double>& base_lp, double alpha) {
    check_lengths(scores, base_lp, "plausibility_mask");
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("plausibility_mask: alpha must be in [0,1]");
    }
    if (alpha == 0.0) return scores; // exp(lp) >= 0 holds for every token
    double max_lp = kNegInf;
    for (double lp : base_lp) max_lp = std::max(max_lp, lp);
    const double threshold = max_lp + std::log(alpha);
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = base_lp[i] >= threshold ? scores[i] : kNegInf;
    }
    return out;
}

std::vector<double> nucleus_filter(const std::vector<double>& logprobs, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("nucleus_filter: p must be in (0,1]");
    if (logprobs.empty()) throw std::invalid_argument("nucleus_filter: empty input");
    std::vector<std::size_t> order(logprobs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return logprobs[a] > logprobs[b]; });
    std::vector<double> out(logprobs.size(), kNegInf);
    double cumulative = 0.0;
    bool reached = false;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (reached) break;
        const std::size_t i = order[rank];
        out[i] = logprobs[i];
        cumulative += std::exp(logprobs[i]);
        if (p < 1.0 && cumulative >= p) reached = true;
    }
    return out;
}

std::vector<double> dexperts_scores(const std::vector<double>& base_lp,
                                    const std::vector<double>& toxic_lp, double beta) {
    check_lengths(base_lp, toxic_lp, "dexperts_scores");
    if (beta < 0.0) throw std::invalid_argument("dexperts_scores: beta must be >= 0");
    std::vector<double> s(base_lp.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = (1.0 + beta) * base_lp[i] - beta * toxic_lp[i];
    return s;
}

std::vector<double> score_distribution(const std::vector<double>& scores, double temperature) {
    if (!(temperature > 0.0)) throw std::invalid_argument("score_distribution: temperature must be positive");
    double mx = kNegInf;
    for (double s : scores) mx = std::max(mx, s);
    if (!std::isfinite(mx)) throw std::invalid_argument("score_distribution: no finite score");
    std::vector<double> probs(scores.size(), 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (std::isfinite(scores[i])) {
            probs[i] = std::exp((scores[i] - mx) / temperature);
            z += probs[i];
        }
    }
    for (double& q : probs) q /= z;
    return probs;
}

std::vector<double> log_renormalize(const std::vector<double>& scores) {
    double mx = kNegInf;
    for (double s : scores) mx = std::max(mx, s);
    if (!std::isfinite(mx)) throw std::invalid_argument("log_renormalize: no finite score");
    double z = 0.0;
    for (double s : scores) {
        if (std::isfinite(s)) z += std::exp(s - mx);
    }
    const double lz = mx + std::log(z);
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = std::isfinite(scores[i]) ? scores[i] - lz : kNegInf;
    return out;
}

int sample_next(const std::vector<double>& scores, double temperature, double u) {
    const std::vector<double> probs = score_distribution(scores, temperature);
    double cumulative = 0.0;
    int last_positive = -1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        cumulative += probs[i];
        last_positive = static_cast<int>(i);
        if (u < cumulative) return static_cast<int>(i);
    }
    return last_positive; // rounding left u just past the final CDF step
}

// ---------------------------------------------------------------------------
// Scorer stacks.
// ---------------------------------------------------------------------------

namespace {

void check_pair(const LogitProvider& base, const LogitProvider& toxic, const char* what) {
    if (base.vocab_size() != toxic.vocab_size()) {
        throw std::invalid_argument(std::string(what) + ": vocab size mismatch");
    }
    if (base.eos_id() != toxic.eos_id()) {
        throw std::invalid_argument(std::string(what) + ": eos id mismatch");
    }
}

} // namespace

ContrastiveProvider::ContrastiveProvider(const LogitProvider& base, const LogitProvider& toxic, double alpha)
    : base_(&base), toxic_(&toxic), alpha_(alpha) {
    check_pair(base, toxic, "ContrastiveProvider");
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("ContrastiveProvider: alpha must be in [0,1]");
    }
}

int ContrastiveProvider::context_limit() const {
    return std::min(base_->context_limit(), toxic_->context_limit());
}

std::vector<double> ContrastiveProvider::logprobs_impl(const std::vector<int>& prefix) const {
    const std::vector<double> base_lp = base_->next_logprobs(prefix);
    const std::vector<double> toxic_lp = toxic_->next_logprobs(prefix);
    return log_renormalize(plausibility_mask(contrastive_scores(base_lp, toxic_lp), base_lp, alpha_));
}

DExpertsProvider::DExpertsProvider(const LogitProvider& base, const LogitProvider& toxic, double beta)
    : base_(&base), toxic_(&toxic), beta_(beta) {
    check_pair(base, toxic, "DExpertsProvider");
    if (beta < 0.0) throw std::invalid_argument("DExpertsProvider: beta must be >= 0");
}

int DExpertsProvider::context_limit() const {
    return std::min(base_->context_limit(), toxic_->context_limit());
}

std::vector<double> DExpertsProvider::logprobs_impl(const std::vector<int>& prefix) const {
    return log_renormalize(dexperts_scores(base_->next_logprobs(prefix), toxic_->next_logprobs(prefix), beta_));
}

// ---------------------------------------------------------------------------
// Generation drivers.
// ---------------------------------------------------------------------------

namespace {

// Keeps the conditioning window strictly below the provider's context limit.
void slide_window(std::vector<int>& window, int context_limit) {
    const std::size_t max_len = static_cast<std::size_t>(context_limit) - 1;
    if (window.size() > max_len) {
        window.erase(window.begin(), window.end() - static_cast<std::ptrdiff_t>(max_len));
    }
}

} // namespace

std::vector<std::vector<int>> generate(const LogitProvider& model, const std::vector<int>& prompt,
                                       const SamplerConfig& cfg) {
    if (cfg.max_new_tokens < 0 || cfg.num_continuations < 1) {
        throw std::invalid_argument("generate: bad sampler config");
    }
    if (static_cast<int>(prompt.size()) >= model.context_limit()) {
        throw std::invalid_argument("generate: context overflow (prompt of " + std::to_string(prompt.size()) +
                                    " tokens, context limit " + std::to_string(model.context_limit()) + ")");
    }
    std::vector<std::vector<int>> out(static_cast<std::size_t>(cfg.num_continuations));
    for (int i = 0; i < cfg.num_continuations; ++i) {
        std::vector<int> window = prompt;
        std::vector<int>& continuation = out[static_cast<std::size_t>(i)];
        for (int t = 0; t < cfg.max_new_tokens; ++t) {
            const std::vector<double> lp = model.next_logprobs(window);
            const std::vector<double> masked = nucleus_filter(lp, cfg.nucleus_p);
            const double u = keyed_uniform(cfg.seed, static_cast<std::uint64_t>(i),
                                           static_cast<std::uint64_t>(t));
            const int tok = sample_next(masked, cfg.temperature, u);
            if (tok == model.eos_id()) break;
            continuation.push_back(tok);
            window.push_back(tok);
            slide_window(window, model.context_limit());
        }
    }
    return out;
}

std::vector<std::vector<int>> sample_distillation(const LogitProvider& scorer,
                                                  const ContrastiveConfig& cfg) {
    if (cfg.max_length < 1 || cfg.num_sequences < 1) {
        throw std::invalid_argument("sample_distillation: bad config");
    }
    if (static_cast<int>(cfg.prompt.size()) >= scorer.context_limit()) {
        throw std::invalid_argument("sample_distillation: context overflow");
    }
    std::vector<std::vector<int>> out(static_cast<std::size_t>(cfg.num_sequences));
    for (int i = 0; i < cfg.num_sequences; ++i) {
        std::vector<int> window = cfg.prompt;
        std::vector<int>& seq = out[static_cast<std::size_t>(i)];
        for (int t = 0; t < cfg.max_length; ++t) {
            const std::vector<double> scores = scorer.next_logprobs(window);
            const double u = keyed_uniform(cfg.seed, static_cast<std::uint64_t>(i),
                                           static_cast<std::uint64_t>(t));
            const int tok = sample_next(scores, 1.0, u);
            seq.push_back(tok);
            if (tok == scorer.eos_id()) break;
            window.push_back(tok);
            slide_window(window, scorer.context_limit());
        }
    }
    return out;
}

} // namespace detoxlab
