// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: every criterion is checked at its stated tolerance and
// prints one pass/fail line. Thresholds for the experiment criteria were
// pre-registered from the pilot run recorded in docs/pilot.md.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "detoxlab/bigram.hpp"
#include "detoxlab/checkpoint.hpp"
#include "detoxlab/config.hpp"
#include "detoxlab/corpus_gen.hpp"
#include "detoxlab/distill.hpp"
#include "detoxlab/eval_runner.hpp"
#include "detoxlab/metrics.hpp"
#include "detoxlab/pipeline.hpp"
#include "detoxlab/rng.hpp"
#include "detoxlab/theory.hpp"

using namespace detoxlab;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Criterion {
public:
    Criterion(int id, std::string name) : id_(id), name_(std::move(name)) {
        start_ = std::chrono::steady_clock::now();
    }

    void require(bool ok, const std::string& what) {
        if (!ok) {
            failed_details_.push_back(what);
        } else {
            passed_details_.push_back(what);
        }
    }

    ~Criterion() {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        const bool pass = failed_details_.empty();
        if (!pass) ++g_failures;
        std::printf("[%s] criterion %d: %s (%.1fs)\n", pass ? "PASS" : "FAIL", id_, name_.c_str(), secs);
        for (const auto& d : passed_details_) std::printf("         ok: %s\n", d.c_str());
        for (const auto& d : failed_details_) std::printf("     FAILED: %s\n", d.c_str());
        std::fflush(stdout);
    }

    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    int id_;
    std::string name_;
    std::vector<std::string> passed_details_;
    std::vector<std::string> failed_details_;
    std::chrono::steady_clock::time_point start_;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), f, a, b, c);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness on the micro-transformer.
// ---------------------------------------------------------------------------
void criterion1() {
    Criterion crit(1, "autodiff matches central finite differences (100 seeds, <1e-4)");

    std::vector<std::string> words;
    for (int i = 0; i < 21; ++i) words.push_back("w" + std::to_string(i));
    Tokenizer tok = Tokenizer::word_level(words);
    TransformerConfig cfg;
    cfg.vocab = tok.vocab_size();
    cfg.context = 16;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.d_model = 16;

    double worst = 0.0;
    std::size_t param_count = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        TransformerLM model(cfg, tok, seed * 7919 + 1);
        ParamVector params = model.params();
        param_count = params.size();

        KeyedRng rng(seed, 0xacc1);
        std::vector<int> block(8);
        for (int& t : block) t = static_cast<int>(rng.below(static_cast<std::size_t>(cfg.vocab)));

        auto graph = model.loss_graph({block});
        ad::backward(graph.loss);
        const ParamVector grads = model.grads_from(graph);

        TransformerLM probe = model;
        auto loss_at = [&](const ParamVector& p) {
            probe.set_params(p);
            return probe.loss_graph({block}).loss->value.item();
        };
        const double h = 1e-5;
        for (int k = 0; k < 12; ++k) {
            const std::size_t i = rng.below(params.size());
            ParamVector p = params;
            p.values[i] += h;
            const double up = loss_at(p);
            p.values[i] = params.values[i] - h;
            const double down = loss_at(p);
            const double fd = (up - down) / (2.0 * h);
            const double ad_g = grads.values[i];
            const double denom = std::max({std::abs(fd), std::abs(ad_g), 1e-6});
            worst = std::max(worst, std::abs(fd - ad_g) / denom);
        }
    }
    crit.require(param_count <= 50000, fmt("micro-transformer has %.0f parameters (<= 50000)",
                                           static_cast<double>(param_count)));
    crit.require(worst < 1e-4, fmt("max relative error %.3g < 1e-4 over 100 seeds x 12 coordinates", worst));
    crit.require(crit.elapsed() < 120.0, fmt("runtime %.1fs < 120s", crit.elapsed()));
}

// ---------------------------------------------------------------------------
// 2. Decoding oracle equivalence on V = 5 bigrams.
// ---------------------------------------------------------------------------
void criterion2() {
    Criterion crit(2, "contrastive decoding matches exact enumeration (TV < 0.01)");

    auto random_bigram = [](int v, std::uint64_t seed) {
        BigramLM m(v, 0, 0.5);
        KeyedRng rng(seed, 0);
        for (int r = 0; r < v; ++r) {
            for (int c = 0; c < v; ++c) m.set_count(r, c, std::floor(10.0 * rng.uniform() * rng.uniform()));
        }
        return m;
    };
    BigramLM base = random_bigram(5, 101);
    BigramLM toxic = random_bigram(5, 202);
    ContrastiveProvider stack(base, toxic, 0.1);
    const int eos = base.eos_id();
    const int max_len = 3;

    std::map<std::vector<int>, double> exact;
    std::function<void(std::vector<int>&, double, int)> walk = [&](std::vector<int>& prefix, double mass,
                                                                   int depth) {
        const std::vector<double> lp = stack.next_logprobs(prefix);
        for (int tok = 0; tok < 5; ++tok) {
            const double p = std::exp(lp[static_cast<std::size_t>(tok)]);
            if (p == 0.0) continue;
            if (tok == eos || depth + 1 == max_len) {
                std::vector<int> seq = prefix;
                seq.push_back(tok);
                exact[seq] += mass * p;
            } else {
                prefix.push_back(tok);
                walk(prefix, mass * p, depth + 1);
                prefix.pop_back();
            }
        }
    };
    std::vector<int> start;
    walk(start, 1.0, 0);
    double mass = 0.0;
    for (const auto& [seq, p] : exact) mass += p;
    crit.require(std::abs(mass - 1.0) < 1e-9, fmt("enumerated distribution mass %.12f", mass));

    ContrastiveConfig cfg;
    cfg.alpha = 0.1;
    cfg.max_length = max_len;
    cfg.num_sequences = 200000;
    cfg.seed = 4242;
    std::map<std::vector<int>, double> empirical;
    for (const auto& seq : sample_distillation(stack, cfg)) empirical[seq] += 1.0 / 200000.0;

    double tv = 0.0;
    for (const auto& [seq, p] : exact) {
        auto it = empirical.find(seq);
        tv += std::abs(p - (it == empirical.end() ? 0.0 : it->second));
    }
    for (const auto& [seq, p] : empirical) {
        if (!exact.count(seq)) tv += p;
    }
    tv *= 0.5;
    crit.require(tv < 0.01, fmt("total variation distance %.5f < 0.01 over 200k samples", tv));
    crit.require(crit.elapsed() < 60.0, fmt("runtime %.1fs < 60s", crit.elapsed()));
}

// ---------------------------------------------------------------------------
// 3. Single-step fine-tuning identity: one SGD detox step.
// ---------------------------------------------------------------------------
void criterion3() {
    Criterion crit(3, "one SGD detox step equals lr * grad log p(x*) within 1e-10");

    std::vector<std::string> words;
    for (int i = 0; i < 12; ++i) words.push_back("v" + std::to_string(i));
    Tokenizer tok = Tokenizer::word_level(words);
    TransformerConfig cfg;
    cfg.vocab = tok.vocab_size();
    cfg.context = 20;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.d_model = 16;
    TransformerLM base(cfg, tok, 8);

    DistilledText text;
    text.sequences = {{3, 5, 1, 4, tok.eos_id()}};
    const double lr = 1e-3;
    FineTuneConfig ft;
    ft.optimizer.kind = OptimizerKind::sgd;
    ft.optimizer.learning_rate = lr;
    ft.batch_size = 1;
    ft.steps = 1;
    TransformerLM target = base;
    detox_finetune(target, text, tok, ft);

    const ParamVector grad_logp = sequence_logprob_grad(base, text.sequences[0]);
    const ParamVector delta = param_delta(base.params(), target.params());
    double worst = 0.0;
    for (std::size_t i = 0; i < delta.values.size(); ++i) {
        worst = std::max(worst, std::abs(delta.values[i] - lr * grad_logp.values[i]));
    }
    crit.require(worst < 1e-10, fmt("max elementwise |delta - lr*grad| = %.3g < 1e-10", worst));
}

// ---------------------------------------------------------------------------
// 4 + 5. Taylor alignment and the gradient-matching correspondence.
// ---------------------------------------------------------------------------
void criteria45(const std::string& artifacts) {
    Tokenizer tok = Tokenizer::word_level(load_vocab_txt(artifacts + "/corpora/vocab.txt"));
    const Corpus pretrain = load_corpus_jsonl(artifacts + "/corpora/pretrain.jsonl");
    const Corpus toxic_corpus = load_corpus_jsonl(artifacts + "/corpora/toxic.jsonl");

    // Log-linear pair fitted in closed form from bigram statistics.
    const int v = tok.vocab_size();
    BigramLM base_bg = BigramLM::from_sequences(v, tok.eos_id(), 0.5, pretrain.encode_all(tok));
    BigramLM toxic_bg = BigramLM::from_sequences(v, tok.eos_id(), 0.5, toxic_corpus.encode_all(tok));
    auto table_of = [&](const BigramLM& m) {
        Tensor t({static_cast<std::size_t>(v), static_cast<std::size_t>(v)}, 0.0);
        for (int r = 0; r < v; ++r) {
            const std::vector<double> row = m.row_logprobs(r);
            for (int c = 0; c < v; ++c) {
                t.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
                    row[static_cast<std::size_t>(c)];
            }
        }
        return t;
    };
    LogLinearLM ll_base(tok, table_of(base_bg));
    LogLinearLM ll_scratch = ll_base;
    const ParamVector ll_tau = param_delta(ll_base.params(), LogLinearLM(tok, table_of(toxic_bg)).params());

    std::vector<std::vector<int>> sequences;
    std::vector<double> scales = {0.5, 0.25, 0.125, 0.0625};

    {
        Criterion crit(4, "Taylor alignment: remainder halving ratio and rank correlation");

        // 500 sequences sampled from the base model.
        ContrastiveConfig scfg;
        scfg.max_length = 8;
        scfg.num_sequences = 560;
        scfg.seed = 17;
        for (auto& seq : sample_distillation(ll_base, scfg)) {
            if (seq.size() > 1 && seq.back() == tok.eos_id()) seq.pop_back();
            if (!seq.empty()) sequences.push_back(std::move(seq));
            if (sequences.size() == 500) break;
        }
        crit.require(sequences.size() == 500,
                     fmt("using %.0f sampled sequences", static_cast<double>(sequences.size())));

        ScalingStudy study = taylor_scaling_study(ll_base, ll_scratch, ll_tau, sequences, scales);
        const double ratio = study.error_ratio.back(); // asymptotic halving
        crit.require(ratio > 3.5 && ratio < 4.5,
                     fmt("|s-g| halving ratio %.3f in [3.5, 4.5] (second-order remainder)", ratio));
        crit.require(study.rank_correlation.back() > 0.9,
                     fmt("log-linear rank correlation(s, g) = %.4f > 0.9 at scale 0.0625",
                         study.rank_correlation.back()));

        // Micro-transformer with its actual toxic vector.
        TransformerLM tr_base = load_transformer_checkpoint(artifacts + "/ckpts/base.ckpt");
        TransformerLM tr_toxic = load_transformer_checkpoint(artifacts + "/ckpts/toxic.ckpt");
        TransformerLM tr_scratch = tr_base;
        const ParamVector tr_tau = param_delta(tr_base.params(), tr_toxic.params());
        std::vector<std::vector<int>> tr_sequences(sequences.begin(), sequences.begin() + 250);
        ScalingStudy tr_study =
            taylor_scaling_study(tr_base, tr_scratch, tr_tau, tr_sequences, {0.125, 0.0625});
        crit.require(tr_study.rank_correlation.back() > 0.9,
                     fmt("micro-transformer rank correlation(s, g) = %.4f > 0.9 at scale 0.0625",
                         tr_study.rank_correlation.back()));
        crit.require(crit.elapsed() < 600.0, fmt("runtime %.1fs < 600s", crit.elapsed()));
    }

    {
        Criterion crit(5, "gradient-matching objective reproduces the Taylor-proxy remainder pointwise");
        const double c = scales.back();
        ParamVector theta_star = ll_base.params();
        for (std::size_t i = 0; i < theta_star.values.size(); ++i) {
            theta_star.values[i] += c * ll_tau.values[i];
        }
        LogLinearLM toxic_model = ll_base;
        toxic_model.set_params(theta_star);

        double worst = 0.0;
        for (std::size_t k = 0; k < 100 && k < sequences.size(); ++k) {
            const AlignmentRecord rec = taylor_alignment(ll_base, toxic_model, sequences[k], c);
            const double f =
                gradient_matching_objective(ll_base, theta_star, sequences[k], SimilarityMeasure::dot);
            const double proxy_remainder = std::abs(rec.contrastive_score - rec.linear_proxy);
            const double matching_remainder = std::abs(rec.contrastive_score - (-f));
            worst = std::max(worst, std::abs(proxy_remainder - matching_remainder));
        }
        crit.require(worst < 1e-9,
                     fmt("max remainder gap between the two routes = %.3g < 1e-9 over 100 sequences", worst));
    }
}

// ---------------------------------------------------------------------------
// 6-8. The desk-scale detox experiment (5 seeds).
// ---------------------------------------------------------------------------
struct MethodMean {
    double tp_id = 0.0, tp_ood = 0.0, ppl = 0.0;
};

MethodMean read_mean(const std::string& path) {
    std::ifstream in(path);
    nlohmann::json j = nlohmann::json::parse(in);
    return {j.at("mean").at("tp_id").get<double>(), j.at("mean").at("tp_ood").get<double>(),
            j.at("mean").at("ppl").get<double>()};
}

void criteria678(const std::string& artifacts, double chain_seconds) {
    const MethodMean base = read_mean(artifacts + "/reports/base.report");
    const MethodMean uni = read_mean(artifacts + "/reports/unidetox_desk_high.report");
    const MethodMean samples = read_mean(artifacts + "/reports/samples.report");
    const MethodMean tbase = read_mean(artifacts + "/reports/transfer_base.report");
    const MethodMean tuni = read_mean(artifacts + "/reports/transfer_unidetox.report");

    {
        Criterion crit(6, "desk-scale detox effect (5 seeds)");
        crit.require(base.tp_id > 0.0, fmt("base ID TP %.3f is nonzero", base.tp_id));
        const double id_drop = 1.0 - uni.tp_id / base.tp_id;
        const double ood_drop = 1.0 - uni.tp_ood / base.tp_ood;
        const double ppl_ratio = uni.ppl / base.ppl;
        crit.require(id_drop >= 0.30, fmt("ID TP drop %.1f%% >= 30%% (%.3f -> %.3f)", 100 * id_drop,
                                          base.tp_id, uni.tp_id));
        crit.require(ood_drop >= 0.20, fmt("OOD TP drop %.1f%% >= 20%% (%.3f -> %.3f)", 100 * ood_drop,
                                           base.tp_ood, uni.tp_ood));
        crit.require(ppl_ratio <= 1.25, fmt("reference perplexity ratio %.3f <= 1.25 (%.2f -> %.2f)",
                                            ppl_ratio, base.ppl, uni.ppl));
        crit.require(chain_seconds < 1800.0, fmt("experiment chain runtime %.0fs < 1800s", chain_seconds));
    }
    {
        Criterion crit(7, "cross-model transfer (5 seeds, unchanged hyperparameters)");
        crit.require(tbase.tp_id > 0.0, fmt("transfer-base ID TP %.3f is nonzero", tbase.tp_id));
        const double drop = 1.0 - tuni.tp_id / tbase.tp_id;
        crit.require(drop >= 0.20, fmt("transfer ID TP drop %.1f%% >= 20%% (%.3f -> %.3f)", 100 * drop,
                                       tbase.tp_id, tuni.tp_id));
    }
    {
        Criterion crit(8, "ablation ordering: unidetox below raw samples at equal budget");
        crit.require(uni.tp_id < samples.tp_id,
                     fmt("unidetox mean ID TP %.3f < samples %.3f", uni.tp_id, samples.tp_id));
    }
}

// ---------------------------------------------------------------------------
// 9. Metric unit conformance (the example table).
// ---------------------------------------------------------------------------
void criterion9() {
    Criterion crit(9, "metric operations reproduce every listed example exactly");
    auto close = [](double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol; };

    // Toxicity probability.
    bool tp_ok = toxicity_probability({{0, 0}, {0, 0}}) == 0.0;
    {
        ScoreTable table;
        for (int i = 0; i < 4; ++i) {
            std::vector<double> row(25, 0.0);
            row[3] = 0.9;
            table.push_back(row);
        }
        for (int i = 0; i < 4; ++i) table.push_back(std::vector<double>(25, 0.0));
        tp_ok = tp_ok && close(toxicity_probability(table), 0.5);
        tp_ok = tp_ok && toxicity_probability({{1.0, 1.0}}, 1.0) == 0.0; // strict >
    }
    crit.require(tp_ok, "TP: zeros, 4-of-8 counting, strict boundary");

    // Expected maximum toxicity.
    bool emt_ok = close(expected_max_toxicity({{0.1, 0.7, 0.3}}), 0.7) &&
                  close(expected_max_toxicity({{0.2}, {0.6}}), 0.4);
    {
        KeyedRng rng(3, 14);
        for (int trial = 0; trial < 200 && emt_ok; ++trial) {
            ScoreTable table;
            const std::size_t rows = 1 + rng.below(6), cols = 1 + rng.below(8);
            for (std::size_t r = 0; r < rows; ++r) {
                std::vector<double> row(cols);
                for (double& s : row) s = rng.uniform();
                table.push_back(std::move(row));
            }
            const double thr = rng.uniform();
            emt_ok = expected_max_toxicity(table) >= thr * toxicity_probability(table, thr) - 1e-12;
        }
    }
    crit.require(emt_ok, "EMT: hand means and EMT >= threshold*TP cross-check");

    // Perplexity.
    BigramLM uniform(7, 0, 1.0);
    bool ppl_ok = close(perplexity(uniform, {1, 2, 3}), 7.0, 1e-9);
    {
        BigramLM chain(3, 0, 1e-300);
        chain.set_row(0, {0, 1, 0});
        chain.set_row(1, {0, 0, 1});
        chain.set_row(2, {0, 1, 0});
        ppl_ok = ppl_ok && close(perplexity(chain, {1, 2, 1}), 1.0, 1e-9);
    }
    crit.require(ppl_ok, "PPL: uniform -> V, certain chain -> 1");

    // dist-n.
    const bool dist_ok = close(dist_n_text({"a a a a"}, 1), 0.25) &&
                         close(dist_n_text({"a b a b"}, 1), 0.5) &&
                         close(dist_n_text({"a b a b"}, 2), 2.0 / 3.0) &&
                         close(dist_n_text({"p q r s"}, 1), 1.0);
    crit.require(dist_ok, "dist-n: hand enumerations");

    // Jaccard.
    const bool jac_ok = close(jaccard_words({"x y z"}, {"x y z"}), 1.0) &&
                        close(jaccard_words({"a b"}, {"c d"}), 0.0) &&
                        close(jaccard_words({"a b c"}, {"b c d"}), 0.5) && jaccard_words({}, {}) == 0.0;
    crit.require(jac_ok, "Jaccard: identical, disjoint, 2/4 overlap, empty");

    // TF-IDF.
    bool tfidf_ok = true;
    {
        auto single = tfidf_top_k({"b a"}, 10);
        tfidf_ok = single.size() == 2 && single[0].first == "a" && single[0].second == 0.0;
        auto ranked = tfidf_top_k({"rare rare rare both", "both other"}, 10);
        tfidf_ok = tfidf_ok && ranked[0].first == "rare";
        tfidf_ok = tfidf_ok && tfidf_top_k({"x y", "y z"}, 99).size() == 3;
    }
    crit.require(tfidf_ok, "TF-IDF: degenerate idf, rare-vs-shared ranking, oversized k");
}

// ---------------------------------------------------------------------------
// 10. Protocol constants.
// ---------------------------------------------------------------------------
void criterion10() {
    Criterion crit(10, "default configs reproduce the published protocol constants");
    const RunConfig cfg = RunConfig::defaults();
    const ContrastiveConfig dc;
    const SamplerConfig sc;
    const FineTuneConfig detox = FineTuneConfig::detox_defaults();
    const FineTuneConfig tox = FineTuneConfig::toxic_defaults();

    crit.require(dc.alpha == 0.1 && cfg.distill.alpha == 0.1, "alpha = 0.1");
    crit.require(dc.num_sequences == 640 && cfg.distill.num_sequences == 640, "640 distilled sequences");
    crit.require(dc.max_length == 256 && cfg.distill.max_length == 256, "max 256 tokens per sequence");
    crit.require(dc.prompt.empty() && cfg.distill.prompt.empty(), "distillation prompted with eos alone");
    crit.require(detox.optimizer.kind == OptimizerKind::adamw && detox.batch_size == 8,
                 "detox fine-tuning: AdamW, batch 8");
    crit.require(detox.optimizer.beta1 == 0.9 && detox.optimizer.beta2 == 0.999,
                 "AdamW beta1 = 0.9, beta2 = 0.999");
    crit.require(tox.epochs == 3 && tox.batch_size == 4, "toxic fine-tuning: 3 epochs, batch 4");
    crit.require(sc.nucleus_p == 0.9 && cfg.sampler.nucleus_p == 0.9, "nucleus p = 0.9");
    crit.require(sc.num_continuations == 25 && cfg.sampler.num_continuations == 25,
                 "25 continuations per prompt");
    crit.require(sc.max_new_tokens == 20 && cfg.sampler.max_new_tokens == 20, "20 tokens per continuation");
    crit.require(cfg.scorer.threshold == 0.5, "toxicity threshold 0.5");
    crit.require(cfg.tune.ppl_ceiling_factor == 1.10, "10% perplexity ceiling in tuning");
    crit.require(cfg.tune.steps_grid.front() == 1000 && cfg.tune.steps_grid.back() == 10000 &&
                     cfg.tune.steps_grid.size() == 10,
                 "tuning steps grid [1000..10000]");
    crit.require(learning_rate_preset("paper_high") == 5e-5 && learning_rate_preset("paper_low") == 1e-5,
                 "published learning-rate pair {5e-5, 1e-5} exposed");
}

} // namespace

int main() {
    std::printf("detoxlab acceptance suite\n");
    criterion1();
    criterion2();
    criterion3();

    // Shared experiment chain for criteria 4-8.
    const std::string artifacts = (fs::temp_directory_path() / "detoxlab_acceptance").string();
    fs::remove_all(artifacts);
    RunConfig cfg = RunConfig::defaults();
    cfg.detox.learning_rate_presets = {"desk_high"}; // the tuned configuration, applied universally
    cfg.eval_methods = {"base", "unidetox", "samples", "transfer"};
    const auto chain_start = std::chrono::steady_clock::now();
    Pipeline pipeline(cfg, artifacts);
    for (const char* stage : {"gen-corpus", "train", "toxify", "distill", "detox", "baseline", "eval"}) {
        const StageResult r = pipeline.run_stage(stage);
        std::printf("    [stage] %s: %s\n", r.stage.c_str(), r.message.c_str());
        std::fflush(stdout);
    }
    const double chain_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - chain_start).count();

    criteria45(artifacts);
    criteria678(artifacts, chain_seconds);
    criterion9();
    criterion10();

    fs::remove_all(artifacts);
    if (g_failures == 0) {
        std::printf("all criteria passed\n");
    } else {
        std::printf("%d criteria FAILED\n", g_failures);
    }
    return g_failures == 0 ? 0 : 1;
}
