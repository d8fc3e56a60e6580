// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "detoxlab/baselines.hpp"
#include "detoxlab/checkpoint.hpp"
#include "detoxlab/distill.hpp"
#include "detoxlab/rng.hpp"
#include "detoxlab/sampling.hpp"

using namespace detoxlab;

namespace {

Tokenizer tiny_tokenizer() {
    return Tokenizer::word_level({"sun", "moon", "hill", "lake", "walks", "rests", "snarf", "blort"});
}

TransformerLM tiny_model(std::uint64_t seed) {
    Tokenizer tok = tiny_tokenizer();
    TransformerConfig cfg;
    cfg.vocab = tok.vocab_size();
    cfg.context = 20;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.d_model = 12;
    return TransformerLM(cfg, tok, seed);
}

Corpus toxic_corpus() {
    Corpus c;
    for (int i = 0; i < 10; ++i) {
        c.records.push_back({"the sun snarf", "toxic", "snarf"});
        c.records.push_back({"moon blort rests", "toxic", "blort"});
    }
    return c;
}

} // namespace

TEST_CASE("task arithmetic: algebraic identities") {
    // The toxic model is a fine-tuned base, so its parameters sit near the
    // base ones; that is also the regime where delta recombination is exact.
    TransformerLM base = tiny_model(1);
    const ParamVector pb = base.params();
    ParamVector pt = pb;
    KeyedRng rng(11, 3);
    for (double& v : pt.values) v += 0.3 * std::abs(v) * rng.gaussian();
    const ParamVector tau = param_delta(pb, pt);

    // lambda = 0: unchanged.
    const ParamVector same = task_arithmetic(pb, tau, 0.0);
    for (std::size_t i = 0; i < pb.values.size(); ++i) CHECK(same.values[i] == pb.values[i]);

    // lambda = 1: 2*base - toxic elementwise.
    const ParamVector flipped = task_arithmetic(pb, tau, 1.0);
    for (std::size_t i = 0; i < pb.values.size(); ++i) {
        CHECK(flipped.values[i] == doctest::Approx(2.0 * pb.values[i] - pt.values[i]).epsilon(1e-15));
    }

    // lambda = -1: reproduces theta_toxic exactly.
    const ParamVector back = task_arithmetic(pb, tau, -1.0);
    for (std::size_t i = 0; i < pb.values.size(); ++i) CHECK(back.values[i] == pt.values[i]);
}

TEST_CASE("task arithmetic invertibility: result + lambda*tau == base") {
    TransformerLM base = tiny_model(3);
    TransformerLM toxic = tiny_model(4);
    const ParamVector pb = base.params();
    ParamVector tau = param_delta(pb, toxic.params());
    for (double lambda : {0.04, 0.2, 1.7}) {
        ParamVector edited = task_arithmetic(pb, tau, lambda);
        ParamVector scaled = tau;
        scaled *= lambda;
        const ParamVector restored = edited + scaled;
        for (std::size_t i = 0; i < pb.values.size(); ++i) {
            CHECK(restored.values[i] == doctest::Approx(pb.values[i]).epsilon(1e-15));
        }
    }
    ParamVector wrong;
    wrong.layout = {{"other", {1}}};
    wrong.values = {0.0};
    CHECK_THROWS_AS(task_arithmetic(pb, wrong, 0.1), std::invalid_argument);
}

TEST_CASE("train_steer: zero epochs returns the Gaussian init, base params untouched") {
    TransformerLM base = tiny_model(5);
    const std::string base_hash = param_hash_hex(base.params());
    SteerTrainConfig cfg = SteerTrainConfig::defaults();
    cfg.epochs = 0;
    cfg.init_seed = 7;
    SteeringMatrix steer = train_steer(base, toxic_corpus(), cfg);

    const std::size_t n = steer.w.numel();
    REQUIRE(n == 12 * 12);
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += steer.w[i];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) var += (steer.w[i] - mean) * (steer.w[i] - mean);
    var /= static_cast<double>(n);
    // Published init: zero mean, 1e-3 variance (3-sigma statistical check).
    CHECK(std::abs(mean) < 3.0 * std::sqrt(1e-3 / static_cast<double>(n)));
    CHECK(var == doctest::Approx(1e-3).epsilon(0.4));

    CHECK(param_hash_hex(base.params()) == base_hash);

    // Same seed, same init.
    SteeringMatrix again = train_steer(base, toxic_corpus(), cfg);
    for (std::size_t i = 0; i < n; ++i) CHECK(again.w[i] == steer.w[i]);
}

TEST_CASE("train_steer: only W moves, toxic likelihood under the steered model improves") {
    TransformerLM base = tiny_model(6);
    const std::string base_hash = param_hash_hex(base.params());
    SteerTrainConfig cfg = SteerTrainConfig::defaults();
    cfg.epochs = 6;
    cfg.batch_size = 4;
    cfg.init_seed = 11;

    SteerTrainConfig init_only = cfg;
    init_only.epochs = 0;
    SteeringMatrix w0 = train_steer(base, toxic_corpus(), init_only);
    SteeringMatrix w1 = train_steer(base, toxic_corpus(), cfg);
    CHECK(param_hash_hex(base.params()) == base_hash); // frozen base

    // Likelihood of the toxic text under the TRAINING-time steering
    // (epsilon = +train_epsilon) must improve against the init.
    const std::vector<int> probe = tiny_tokenizer().encode("the sun snarf");
    SteeredLM steered_init(base, w0, cfg.train_epsilon);
    SteeredLM steered_trained(base, w1, cfg.train_epsilon);
    CHECK(sequence_logprob(steered_trained, probe) > sequence_logprob(steered_init, probe));
}

TEST_CASE("steer_embeddings: epsilon = 0 is bit-identical to the base") {
    TransformerLM base = tiny_model(8);
    SteeringMatrix steer;
    steer.w = Tensor({12, 12}, 0.0);
    KeyedRng rng(31, 5);
    for (std::size_t i = 0; i < steer.w.numel(); ++i) steer.w[i] = rng.gaussian();

    SteeredLM steered(base, steer, 0.0);
    for (const std::vector<int>& prefix : {std::vector<int>{}, {2, 4}, {1, 1, 6}}) {
        const std::vector<double> a = base.next_logprobs(prefix);
        const std::vector<double> b = steered.next_logprobs(prefix);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
}

TEST_CASE("steer_embeddings: identity W scales embeddings by (1 - eps)") {
    Tensor emb({6, 3}, 0.0);
    KeyedRng rng(17, 4);
    for (std::size_t i = 0; i < emb.numel(); ++i) emb[i] = rng.gaussian();
    Tensor eye({3, 3}, 0.0);
    for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    const double eps = 0.25;
    const Tensor steered = steer_embedding_table(emb, eye, eps);
    for (std::size_t i = 0; i < emb.numel(); ++i) {
        CHECK(steered[i] == doctest::Approx((1.0 - eps) * emb[i]).epsilon(1e-15));
    }
    Tensor wrong({4, 4}, 0.0);
    CHECK_THROWS_AS(steer_embedding_table(emb, wrong, eps), std::invalid_argument);
}

TEST_CASE("steer_embeddings: symmetric perturbation e(eps) + e(-eps) = 2e") {
    Tensor emb({5, 4}, 0.0);
    Tensor w({4, 4}, 0.0);
    KeyedRng rng(23, 6);
    for (std::size_t i = 0; i < emb.numel(); ++i) emb[i] = rng.gaussian();
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.gaussian();
    const double eps = 0.37;
    const Tensor plus = steer_embedding_table(emb, w, eps);
    const Tensor minus = steer_embedding_table(emb, w, -eps);
    for (std::size_t i = 0; i < emb.numel(); ++i) {
        CHECK(plus[i] + minus[i] == doctest::Approx(2.0 * emb[i]).epsilon(1e-12));
    }
}

TEST_CASE("steer_embeddings: logit change is first order in eps") {
    TransformerLM base = tiny_model(9);
    SteeringMatrix steer;
    steer.w = Tensor({12, 12}, 0.0);
    KeyedRng rng(41, 7);
    for (std::size_t i = 0; i < steer.w.numel(); ++i) steer.w[i] = 0.5 * rng.gaussian();

    const std::vector<int> prefix = {2, 5, 1};
    const std::vector<double> base_lp = base.next_logprobs(prefix);
    auto max_delta = [&](double eps) {
        SteeredLM steered(base, steer, eps);
        const std::vector<double> lp = steered.next_logprobs(prefix);
        double mx = 0.0;
        for (std::size_t i = 0; i < lp.size(); ++i) mx = std::max(mx, std::abs(lp[i] - base_lp[i]));
        return mx;
    };
    const double d1 = max_delta(1e-3);
    const double d2 = max_delta(5e-4);
    CHECK(d1 / d2 == doctest::Approx(2.0).epsilon(0.25)); // halving eps roughly halves the delta
}

TEST_CASE("preprompts match the published wording") {
    const std::string short_text = preprompt_text(PrepromptKind::short_form);
    const std::string long_text = preprompt_text(PrepromptKind::long_form);
    CHECK(short_text.rfind("Generate text that is respectful", 0) == 0);
    CHECK(long_text.rfind("You are generating text in a neutral", 0) == 0);
    CHECK(short_text ==
          "Generate text that is respectful, neutral, and safe. Avoid any harmful or biased content.\n");
    CHECK(long_text ==
          "You are generating text in a neutral and respectful manner. Ensure that your output is safe and "
          "free from any harmful, unethical, racist, sexist, toxic, dangerous, or illegal content. Avoid "
          "generating text that contains biased, offensive, or harmful language. Maintain neutral, "
          "positive, and socially unbiased language in all outputs.\n");

    CHECK(apply_preprompt("the sun", PrepromptKind::short_form) == short_text + "the sun");
    CHECK(apply_preprompt("", PrepromptKind::long_form) == long_text);
    CHECK(apply_preprompt("x", PrepromptKind::custom, "be nice: ") == "be nice: x");
    CHECK(preprompt_kind_from_string("short") == PrepromptKind::short_form);
    CHECK_THROWS_AS(preprompt_kind_from_string("medium"), std::invalid_argument);
}
