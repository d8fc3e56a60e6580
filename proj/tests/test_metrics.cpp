// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

#include "detoxlab/bigram.hpp"
#include "detoxlab/metrics.hpp"
#include "detoxlab/rng.hpp"
#include "detoxlab/scorer.hpp"
#include "detoxlab/eval_runner.hpp"
#include "detoxlab/train.hpp"
#include "detoxlab/transformer.hpp"

using namespace detoxlab;

TEST_CASE("toxicity probability counts prompts whose max crosses the threshold strictly") {
    // All zeros: nothing crosses.
    CHECK(toxicity_probability({{0, 0, 0}, {0, 0, 0}}) == 0.0);

    // Four prompts with one 0.9 continuation among 25, four all-zero: 0.5.
    ScoreTable table;
    for (int i = 0; i < 4; ++i) {
        std::vector<double> row(25, 0.0);
        row[7] = 0.9;
        table.push_back(row);
    }
    for (int i = 0; i < 4; ++i) table.push_back(std::vector<double>(25, 0.0));
    CHECK(toxicity_probability(table) == doctest::Approx(0.5));

    // Strict comparison: scores <= threshold never count.
    ScoreTable ones = {{1.0, 1.0}, {1.0, 0.2}};
    CHECK(toxicity_probability(ones, 1.0) == 0.0);

    ScoreTable ragged = {{0.1, 0.2}, {0.3}};
    CHECK_THROWS_AS(toxicity_probability(ragged), std::invalid_argument);
}

TEST_CASE("expected maximum toxicity averages per-prompt maxima") {
    CHECK(expected_max_toxicity({{0.1, 0.7, 0.3}}) == doctest::Approx(0.7));
    CHECK(expected_max_toxicity({{0.2, 0.1}, {0.6, 0.5}}) == doctest::Approx(0.4));
}

TEST_CASE("EMT dominates threshold * TP on random score tables") {
    KeyedRng rng(12, 1);
    for (int trial = 0; trial < 50; ++trial) {
        ScoreTable table;
        const std::size_t prompts = 1 + rng.below(8);
        const std::size_t width = 1 + rng.below(10);
        for (std::size_t i = 0; i < prompts; ++i) {
            std::vector<double> row(width);
            for (double& s : row) s = rng.uniform();
            table.push_back(std::move(row));
        }
        const double threshold = rng.uniform();
        CHECK(expected_max_toxicity(table) >= threshold * toxicity_probability(table, threshold) - 1e-12);
    }
}

TEST_CASE("TP and EMT are permutation invariant within a prompt") {
    ScoreTable table = {{0.1, 0.8, 0.3, 0.05}, {0.4, 0.2, 0.9, 0.0}};
    ScoreTable shuffled = table;
    std::reverse(shuffled[0].begin(), shuffled[0].end());
    std::rotate(shuffled[1].begin(), shuffled[1].begin() + 2, shuffled[1].end());
    CHECK(toxicity_probability(table, 0.5) == toxicity_probability(shuffled, 0.5));
    CHECK(expected_max_toxicity(table) == expected_max_toxicity(shuffled));
}

TEST_CASE("perplexity closed forms") {
    BigramLM uniform(7, 0, 1.0);
    CHECK(perplexity(uniform, {1, 2, 3, 4}) == doctest::Approx(7.0).epsilon(1e-10));

    // A model that assigns probability ~1 at every step: PPL -> 1.
    BigramLM chain(3, 0, 1e-300);
    chain.set_row(0, {0.0, 1.0, 0.0});
    chain.set_row(1, {0.0, 0.0, 1.0});
    chain.set_row(2, {0.0, 1.0, 0.0});
    CHECK(perplexity(chain, {1, 2, 1, 2}) == doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(perplexity(uniform, {}), std::invalid_argument);
}

TEST_CASE("bigram perplexity matches the closed-form chain product") {
    BigramLM m(4, 0, 0.5);
    KeyedRng rng(5, 5);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) m.set_count(r, c, static_cast<double>(rng.below(12)));
    }
    const std::vector<int> text = {2, 1, 3, 3, 0, 2};
    double logp = 0.0;
    int prev = m.eos_id();
    for (int t : text) {
        logp += m.row_logprobs(prev)[static_cast<std::size_t>(t)];
        prev = t;
    }
    CHECK(perplexity(m, text) ==
          doctest::Approx(std::exp(-logp / static_cast<double>(text.size()))).epsilon(1e-12));
}

TEST_CASE("perplexity of any text is at least one") {
    KeyedRng rng(3, 3);
    BigramLM m(5, 0, 0.3);
    for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 5; ++c) m.set_count(r, c, static_cast<double>(rng.below(30)));
    }
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> text(1 + rng.below(10));
        for (int& t : text) t = static_cast<int>(rng.below(5));
        CHECK(perplexity(m, text) >= 1.0);
    }
}

TEST_CASE("dist-n hand cases") {
    CHECK(dist_n_text({"a a a a"}, 1) == doctest::Approx(0.25));
    CHECK(dist_n_text({"a b a b"}, 1) == doctest::Approx(0.5));
    CHECK(dist_n_text({"a b a b"}, 2) == doctest::Approx(2.0 / 3.0));
    CHECK(dist_n_text({"q w e r t y"}, 1) == doctest::Approx(1.0));
    // Continuations shorter than n contribute zero slots.
    CHECK(dist_n_text({"a", "a b"}, 2) == doctest::Approx(1.0));
    CHECK(dist_n_text({"a"}, 2) == 0.0);
    CHECK_THROWS_AS(dist_n({{1}}, 0), std::invalid_argument);
}

TEST_CASE("duplicating a continuation never increases dist-n") {
    KeyedRng rng(8, 2);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<std::vector<int>> conts;
        const std::size_t rows = 1 + rng.below(5);
        for (std::size_t i = 0; i < rows; ++i) {
            std::vector<int> c(1 + rng.below(8));
            for (int& t : c) t = static_cast<int>(rng.below(4));
            conts.push_back(std::move(c));
        }
        for (int n = 1; n <= 3; ++n) {
            const double before = dist_n(conts, n);
            std::vector<std::vector<int>> dup = conts;
            dup.push_back(conts[rng.below(conts.size())]);
            CHECK(dist_n(dup, n) <= before + 1e-12);
        }
    }
}

TEST_CASE("few-shot accuracy: single completion, tie-breaking, constructed task") {
    Tokenizer tok = Tokenizer::word_level(
        {"Question:", "Answer:", "the", "trees", "rivers", "are", "very", "tall", "long"});

    // The corpus pins "tall" after "the trees are very" and "long" after
    // "the rivers are very" (association needs more than bigram context, so
    // this trains the micro-transformer).
    std::vector<std::vector<int>> corpus;
    for (int i = 0; i < 12; ++i) {
        corpus.push_back(tok.encode("the trees are very tall"));
        corpus.push_back(tok.encode("the rivers are very long"));
        corpus.push_back(tok.encode("Question: the trees are very Answer: tall"));
        corpus.push_back(tok.encode("Question: the rivers are very Answer: long"));
    }
    TransformerConfig mc;
    mc.vocab = tok.vocab_size();
    mc.context = 16;
    mc.layers = 1;
    mc.heads = 2;
    mc.d_model = 16;
    TransformerLM model(mc, tok, 5);
    TrainConfig tc;
    tc.optimizer.learning_rate = 4e-3;
    tc.steps = 160;
    tc.batch_size = 8;
    tc.seed = 6;
    train_lm(model, corpus, tc);

    FewShotTask t1;
    t1.prompt = "Question: the trees are very Answer:";
    t1.completions = {"tall", "long"};
    t1.gold = 0;
    FewShotTask t2;
    t2.prompt = "Question: the rivers are very Answer:";
    t2.completions = {"tall", "long"};
    t2.gold = 1;
    CHECK(few_shot_accuracy(model, tok, {t1, t2}) > 0.9);

    // Single completion: always correct when it is the gold one.
    FewShotTask solo = t1;
    solo.completions = {"tall"};
    CHECK(few_shot_accuracy(model, tok, {solo}) == 1.0);

    // Uniform model: all ratios tie; ties break toward the lowest index.
    BigramLM uniform(tok.vocab_size(), tok.eos_id(), 1.0);
    FewShotTask tie = t1;
    tie.gold = 0;
    CHECK(few_shot_accuracy(uniform, tok, {tie}) == 1.0);
    tie.gold = 1;
    CHECK(few_shot_accuracy(uniform, tok, {tie}) == 0.0);

    FewShotTask bad = t1;
    bad.answer_context = "Reply:";
    CHECK_THROWS_AS(few_shot_accuracy(model, tok, {bad}), std::invalid_argument);
}

TEST_CASE("jaccard word similarity") {
    CHECK(jaccard_words({"the calm dog"}, {"the calm dog"}) == doctest::Approx(1.0));
    CHECK(jaccard_words({"aa bb"}, {"cc dd"}) == 0.0);
    CHECK(jaccard_words({"a b c"}, {"b c d"}) == doctest::Approx(0.5));
    CHECK(jaccard_words({}, {}) == 0.0);
    // Case-insensitive unique word sets.
    CHECK(jaccard_words({"The THE the"}, {"the"}) == doctest::Approx(1.0));
}

TEST_CASE("tf-idf ranking") {
    // Single document: idf = 0 everywhere, ranking lexicographic.
    auto single = tfidf_top_k({"beta alpha beta"}, 10);
    REQUIRE(single.size() == 2);
    CHECK(single[0].first == "alpha");
    CHECK(single[1].first == "beta");
    CHECK(single[0].second == 0.0);

    // A term appearing 3x in 1 of 2 docs ranks above a term in both docs.
    auto ranked = tfidf_top_k({"rare rare rare shared", "shared other"}, 10);
    CHECK(ranked[0].first == "rare");
    CHECK(ranked[0].second == doctest::Approx(3.0 * std::log(2.0)));
    double shared_score = -1.0;
    for (const auto& [term, score] : ranked) {
        if (term == "shared") shared_score = score;
    }
    CHECK(shared_score == doctest::Approx(0.0));

    // k larger than the vocabulary returns everything.
    CHECK(tfidf_top_k({"x y", "y z"}, 100).size() == 3);
    CHECK(tfidf_top_k({"x y z w"}, 2).size() == 2);
    CHECK_THROWS_AS(tfidf_top_k({}, 5), std::invalid_argument);
}

TEST_CASE("lexicon scorer: determinism, monotonicity, threshold semantics") {
    std::vector<LexiconEntry> entries = {{"snarf", 1.0, "dom1"}, {"blort", 0.5, "dom2"}};
    LexiconScorer scorer(entries, 0.6);

    CHECK(scorer.score("") == 0.0);
    CHECK(scorer.score("the calm dog") == 0.0);
    // One full-weight hit crosses the 0.5 threshold.
    CHECK(scorer.score("a snarf day") == doctest::Approx(0.6));
    CHECK(scorer.score("a snarf day") > 0.5);
    // Monotone nondecreasing in hits.
    const double one = scorer.score("snarf");
    const double two = scorer.score("snarf snarf");
    const double three = scorer.score("snarf snarf snarf");
    CHECK(one <= two);
    CHECK(two <= three);
    CHECK(three <= 1.0);
    // Half-weight hit stays below the threshold.
    CHECK(scorer.score("blort") == doctest::Approx(1.0 - std::pow(0.4, 0.5)));
    CHECK(scorer.score("blort") < 0.5);
    // Case-insensitive matching on word boundaries.
    CHECK(scorer.score("SNARF!") == doctest::Approx(0.6));
    CHECK(scorer.score("snarfish") == 0.0);
    // Deterministic.
    CHECK(scorer.score("snarf blort snarf") == scorer.score("snarf blort snarf"));
}

TEST_CASE("run_eval: deterministic reruns are byte-identical; TP matches enumeration") {
    // Designated-token scorer on the bigram oracle: per-continuation hit
    // probability is enumerable exactly, so TP over many prompts must land
    // within sampling noise of 1 - (1-p)^25.
    struct TokenScorer : ToxicityScorer {
        double score(const std::string& text) const override {
            for (const auto& w : split_words_lower(text)) {
                if (w == "bad") return 1.0;
            }
            return 0.0;
        }
    };
    Tokenizer tok = Tokenizer::word_level({"ok", "bad", "so"});
    const int bad_id = tok.encode("bad")[0];
    BigramLM model(tok.vocab_size(), tok.eos_id(), 0.4);
    KeyedRng rng(7, 7);
    for (int r = 0; r < tok.vocab_size(); ++r) {
        for (int c = 0; c < tok.vocab_size(); ++c) {
            model.set_count(r, c, std::floor(8.0 * rng.uniform()));
        }
    }

    SamplerConfig sc;
    sc.max_new_tokens = 3;
    sc.num_continuations = 25;
    sc.seed = 5;

    // Exact P(continuation contains "bad") for the nucleus-filtered process.
    const std::vector<int> prompt_ids = tok.encode("ok");
    std::function<double(std::vector<int>&, int)> p_hit = [&](std::vector<int>& prefix, int depth) {
        if (depth == sc.max_new_tokens) return 0.0;
        const std::vector<double> masked = nucleus_filter(model.next_logprobs(prefix), sc.nucleus_p);
        const std::vector<double> dist = score_distribution(masked, 1.0);
        double total = 0.0;
        for (int t = 0; t < tok.vocab_size(); ++t) {
            const double p = dist[static_cast<std::size_t>(t)];
            if (p == 0.0) continue;
            if (t == bad_id) {
                total += p;
            } else if (t != tok.eos_id()) {
                prefix.push_back(t);
                total += p * p_hit(prefix, depth + 1);
                prefix.pop_back();
            }
        }
        return total;
    };
    std::vector<int> scratch = prompt_ids;
    const double q = p_hit(scratch, 0);
    const double expect_tp = 1.0 - std::pow(1.0 - q, sc.num_continuations);

    TokenScorer scorer;
    EvalInputs in;
    in.model = &model;
    in.tokenizer = &tok;
    const int prompts = 160;
    for (int i = 0; i < prompts; ++i) {
        in.id_prompts.push_back({"ok", "d"});
        in.ood_prompts.push_back({"ok", "d"});
    }
    in.scorer = &scorer;
    EvalReport report = run_eval(in, sc);
    const double sigma = std::sqrt(expect_tp * (1.0 - expect_tp) / prompts);
    CHECK(std::abs(report.metrics.tp_id - expect_tp) < 4.0 * sigma + 1e-9);

    // Determinism: a rerun serializes byte-identically.
    EvalReport again = run_eval(in, sc);
    const auto tmp1 = std::filesystem::temp_directory_path() / "dtx_report_a.report";
    const auto tmp2 = std::filesystem::temp_directory_path() / "dtx_report_b.report";
    report.save(tmp1.string());
    again.save(tmp2.string());
    std::ifstream f1(tmp1, std::ios::binary), f2(tmp2, std::ios::binary);
    const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    CHECK_FALSE(s1.empty());
    std::filesystem::remove(tmp1);
    std::filesystem::remove(tmp2);

    // Report round trip restores the metrics.
    report.save(tmp1.string());
    EvalReport loaded = EvalReport::load(tmp1.string());
    CHECK(loaded.metrics.tp_id == report.metrics.tp_id);
    CHECK(loaded.id_records.size() == report.id_records.size());
    std::filesystem::remove(tmp1);
}
