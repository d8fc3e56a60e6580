// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "detoxlab/loglinear.hpp"
#include "detoxlab/rng.hpp"
#include "detoxlab/sampling.hpp"
#include "detoxlab/theory.hpp"

using namespace detoxlab;

namespace {

Tokenizer tiny_tokenizer() {
    return Tokenizer::word_level({"a", "b", "c", "d", "e"});
}

LogLinearLM random_loglinear(std::uint64_t seed, double scale = 0.8) {
    return LogLinearLM(tiny_tokenizer(), seed, scale);
}

ParamVector random_direction(const ParamVector& like, std::uint64_t seed, double scale) {
    ParamVector tau = like;
    KeyedRng rng(seed, 99);
    for (double& v : tau.values) v = scale * rng.gaussian();
    return tau;
}

std::vector<std::vector<int>> sample_sequences(const LogLinearLM& model, int count, int max_len,
                                               std::uint64_t seed) {
    ContrastiveConfig cfg;
    cfg.max_length = max_len;
    cfg.num_sequences = count;
    cfg.seed = seed;
    std::vector<std::vector<int>> out;
    for (auto& seq : sample_distillation(model, cfg)) {
        if (seq.size() > 1 && seq.back() == model.eos_id()) seq.pop_back();
        if (!seq.empty()) out.push_back(std::move(seq));
    }
    return out;
}

} // namespace

TEST_CASE("finite differences recover analytic gradients") {
    ParamVector p;
    p.layout = {{"x", {3}}};
    p.values = {0.5, -1.0, 2.0};

    // Quadratic: grad of ||p||^2 is 2p, O(h^2) accurate.
    auto quad = [](const ParamVector& q) {
        double s = 0.0;
        for (double v : q.values) s += v * v;
        return s;
    };
    ParamVector g = finite_diff_gradient(quad, p, 1e-5);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(g.values[i] == doctest::Approx(2.0 * p.values[i]).epsilon(1e-8));
    }

    // Linear: exact to machine precision for any h.
    auto lin = [](const ParamVector& q) { return 3.0 * q.values[0] - 2.0 * q.values[1] + q.values[2]; };
    for (double h : {1e-2, 1e-5, 1e-7}) {
        ParamVector gl = finite_diff_gradient(lin, p, h);
        CHECK(gl.values[0] == doctest::Approx(3.0).epsilon(1e-9));
        CHECK(gl.values[1] == doctest::Approx(-2.0).epsilon(1e-9));
        CHECK(gl.values[2] == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK_THROWS_AS(finite_diff_gradient(quad, p, 0.0), std::invalid_argument);
}

TEST_CASE("autodiff sequence gradient matches finite differences on the one-layer model") {
    LogLinearLM model = random_loglinear(3);
    const std::vector<int> x = {1, 4, 2};
    const ParamVector autodiff_grad = sequence_logprob_grad(model, x);

    LogLinearLM scratch = model;
    auto logp = [&](const ParamVector& q) {
        scratch.set_params(q);
        return sequence_logprob(scratch, x);
    };
    const ParamVector fd = finite_diff_gradient(logp, model.params(), 1e-5);
    for (std::size_t i = 0; i < fd.values.size(); ++i) {
        const double denom = std::max({std::abs(fd.values[i]), std::abs(autodiff_grad.values[i]), 1e-6});
        CHECK(std::abs(fd.values[i] - autodiff_grad.values[i]) / denom < 1e-4);
    }
}

TEST_CASE("taylor alignment: tau = 0 gives s = g = 0") {
    LogLinearLM base = random_loglinear(5);
    AlignmentRecord rec = taylor_alignment(base, base, {2, 3, 1});
    CHECK(rec.contrastive_score == 0.0);
    CHECK(rec.linear_proxy == 0.0);
}

TEST_CASE("halving the toxic-vector scale shrinks |s - g| about fourfold") {
    LogLinearLM base = random_loglinear(7);
    LogLinearLM scratch = base;
    const ParamVector tau = random_direction(base.params(), 11, 0.6);
    const std::vector<std::vector<int>> sequences = sample_sequences(base, 400, 6, 13);
    REQUIRE(sequences.size() > 200);

    ScalingStudy study = taylor_scaling_study(base, scratch, tau, sequences, {0.5, 0.25, 0.125, 0.0625});
    REQUIRE(study.error_ratio.size() == 3);
    // Second-order remainder: successive halvings approach a factor of 4.
    CHECK(study.error_ratio.back() > 3.5);
    CHECK(study.error_ratio.back() < 4.5);
    // Rank correlation tightens as the scale shrinks.
    CHECK(study.rank_correlation.back() > 0.95);
}

TEST_CASE("gradient matching objective: identities and measures") {
    LogLinearLM model = random_loglinear(17);
    const std::vector<int> x = {0, 2, 4};

    // theta_star == theta: dot similarity is exactly zero, cosine is an error.
    const ParamVector theta = model.params();
    CHECK(gradient_matching_objective(model, theta, x, SimilarityMeasure::dot) == 0.0);
    CHECK_THROWS_AS(gradient_matching_objective(model, theta, x, SimilarityMeasure::cosine),
                    std::invalid_argument);

    // mse is nonnegative for any inputs.
    KeyedRng rng(19, 4);
    for (int trial = 0; trial < 10; ++trial) {
        ParamVector star = theta;
        for (double& v : star.values) v += 0.1 * rng.gaussian();
        CHECK(gradient_matching_objective(model, star, x, SimilarityMeasure::mse) >= 0.0);
    }
    CHECK(similarity_from_string("dot") == SimilarityMeasure::dot);
    CHECK_THROWS_AS(similarity_from_string("l1"), std::invalid_argument);
}

TEST_CASE("gradient matching with dot similarity: -f equals s within the same remainder") {
    LogLinearLM base = random_loglinear(23);
    LogLinearLM scratch = base;
    const ParamVector tau = random_direction(base.params(), 29, 0.4);
    const std::vector<std::vector<int>> sequences = sample_sequences(base, 60, 5, 31);

    const double c = 0.25;
    ParamVector theta_star = base.params();
    for (std::size_t i = 0; i < theta_star.values.size(); ++i) theta_star.values[i] += c * tau.values[i];
    scratch.set_params(theta_star);

    for (const auto& x : sequences) {
        AlignmentRecord rec = taylor_alignment(base, scratch, x, c);
        const double f = gradient_matching_objective(base, theta_star, x, SimilarityMeasure::dot);
        // g and -f are the same quantity computed through two code paths.
        CHECK(std::abs(rec.linear_proxy - (-f)) < 1e-9);
        const double proxy_remainder = std::abs(rec.contrastive_score - rec.linear_proxy);
        const double matching_remainder = std::abs(rec.contrastive_score - (-f));
        CHECK(std::abs(proxy_remainder - matching_remainder) < 1e-9);
    }
}

TEST_CASE("sign consistency: contrastively sampled sequences have positive mean proxy") {
    LogLinearLM base = random_loglinear(37);
    const ParamVector tau = random_direction(base.params(), 41, 0.5);
    ParamVector toxic_params = base.params();
    for (std::size_t i = 0; i < toxic_params.values.size(); ++i) toxic_params.values[i] += 0.5 * tau.values[i];
    LogLinearLM toxic = base;
    toxic.set_params(toxic_params);

    ContrastiveProvider scorer(base, toxic, 0.1);
    ContrastiveConfig cfg;
    cfg.alpha = 0.1;
    cfg.max_length = 6;
    cfg.num_sequences = 150;
    cfg.seed = 43;
    ParamVector tau_scaled = tau;
    tau_scaled *= 0.5;

    double mean_g = 0.0;
    std::size_t n = 0;
    for (auto& seq : sample_distillation(scorer, cfg)) {
        if (seq.size() > 1 && seq.back() == base.eos_id()) seq.pop_back();
        if (seq.empty()) continue;
        const ParamVector grad = sequence_logprob_grad(base, seq);
        double g = 0.0;
        for (std::size_t i = 0; i < grad.values.size(); ++i) g += -tau_scaled.values[i] * grad.values[i];
        mean_g += g;
        ++n;
    }
    REQUIRE(n > 50);
    mean_g /= static_cast<double>(n);
    CHECK(mean_g > 0.0);
}

TEST_CASE("per-token alignment tracks the sequence-level story") {
    LogLinearLM base = random_loglinear(47);
    const ParamVector tau = random_direction(base.params(), 53, 0.3);
    ParamVector toxic_params = base.params();
    for (std::size_t i = 0; i < toxic_params.values.size(); ++i) toxic_params.values[i] += 0.25 * tau.values[i];
    LogLinearLM toxic = base;
    toxic.set_params(toxic_params);

    std::vector<double> all_s, all_g;
    for (const auto& x : sample_sequences(base, 12, 6, 59)) {
        PerTokenAlignment pt = per_token_alignment(base, toxic, x);
        REQUIRE(pt.s.size() == x.size());
        // Per-token scores sum to the sequence-level contrastive score.
        double s_sum = 0.0;
        for (double s : pt.s) s_sum += s;
        AlignmentRecord rec = taylor_alignment(base, toxic, x, 0.25);
        CHECK(s_sum == doctest::Approx(rec.contrastive_score).epsilon(1e-8));
        double g_sum = 0.0;
        for (double g : pt.g) g_sum += g;
        CHECK(g_sum == doctest::Approx(rec.linear_proxy).epsilon(1e-6));
        all_s.insert(all_s.end(), pt.s.begin(), pt.s.end());
        all_g.insert(all_g.end(), pt.g.begin(), pt.g.end());
    }
    CHECK(spearman_rank_correlation(all_s, all_g) > 0.8);
}

TEST_CASE("spearman rank correlation basics") {
    CHECK(spearman_rank_correlation({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman_rank_correlation({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(spearman_rank_correlation({1, 1, 1}, {1, 2, 3}), std::invalid_argument);
    CHECK_THROWS_AS(spearman_rank_correlation({1.0}, {2.0}), std::invalid_argument);
}

TEST_CASE("detox step alignment returns a cosine in [-1, 1]") {
    LogLinearLM base = random_loglinear(61);
    LogLinearLM scratch = base;
    const ParamVector tau = random_direction(base.params(), 67, 0.5);
    const std::vector<std::vector<int>> sequences = sample_sequences(base, 16, 5, 71);
    const double cosine = detox_step_alignment(base, scratch, tau, sequences, 1e-2);
    CHECK(cosine >= -1.0);
    CHECK(cosine <= 1.0);
    // Scratch is restored to the base parameters afterwards.
    const ParamVector delta = param_delta(base.params(), scratch.params());
    double norm = 0.0;
    for (double v : delta.values) norm += std::abs(v);
    CHECK(norm == 0.0);
}
