// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/eval_runner.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "detoxlab/rng.hpp"

namespace detoxlab {

namespace {

struct PromptEval {
    std::vector<PromptRecord> records;
    ScoreTable scores;
    std::vector<double> dist1, dist2, dist3;
    std::vector<double> continuation_ppl;
};

PromptEval eval_prompt_set(const EvalInputs& in, const std::vector<PromptSpec>& prompts,
                           const SamplerConfig& cfg, std::uint64_t set_tag) {
    PromptEval out;
    for (std::size_t pi = 0; pi < prompts.size(); ++pi) {
        const PromptSpec& spec = prompts[pi];
        // Preprompt conditions the generation but is never scored. Longer
        // conditionings than the model's context (the long safety preprompt
        // on a short-context model) are left-truncated to what fits.
        const std::string conditioned = in.preprompt.empty() ? spec.text : in.preprompt + spec.text;
        std::vector<int> prompt_ids = in.tokenizer->encode(conditioned);
        const std::size_t max_prompt = static_cast<std::size_t>(in.model->context_limit()) - 1;
        if (prompt_ids.size() > max_prompt) {
            prompt_ids.erase(prompt_ids.begin(),
                             prompt_ids.end() - static_cast<std::ptrdiff_t>(max_prompt));
        }

        SamplerConfig per_prompt = cfg;
        per_prompt.seed = keyed_bits(cfg.seed, 0xe7a1 + set_tag, pi);
        const std::vector<std::vector<int>> continuations = generate(*in.model, prompt_ids, per_prompt);

        PromptRecord rec;
        rec.prompt = spec.text;
        rec.domain = spec.domain;
        std::vector<double> row;
        for (const auto& tokens : continuations) {
            ScoredContinuation sc;
            sc.text = in.tokenizer->decode(tokens);
            sc.score = in.scorer->score(sc.text);
            row.push_back(sc.score);
            rec.continuations.push_back(std::move(sc));
            if (in.reference != nullptr) {
                // Continuations are scored given their prompt (without the
                // preprompt, which is stripped before any scoring).
                const Tokenizer& ref_tok = in.reference_tokenizer ? *in.reference_tokenizer : *in.tokenizer;
                const std::vector<int> ref_prompt = ref_tok.encode(spec.text);
                const std::vector<int> ref_ids = ref_tok.encode(rec.continuations.back().text);
                if (!ref_ids.empty()) {
                    out.continuation_ppl.push_back(conditional_perplexity(*in.reference, ref_prompt, ref_ids));
                }
            }
        }
        out.dist1.push_back(dist_n(continuations, 1));
        out.dist2.push_back(dist_n(continuations, 2));
        out.dist3.push_back(dist_n(continuations, 3));
        out.scores.push_back(std::move(row));
        out.records.push_back(std::move(rec));
    }
    return out;
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

nlohmann::json records_json(const std::vector<PromptRecord>& records) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json conts = nlohmann::json::array();
        for (const auto& c : r.continuations) conts.push_back({{"text", c.text}, {"score", c.score}});
        out.push_back({{"prompt", r.prompt}, {"domain", r.domain}, {"continuations", conts}});
    }
    return out;
}

std::vector<PromptRecord> records_from_json(const nlohmann::json& j) {
    std::vector<PromptRecord> out;
    for (const auto& rj : j) {
        PromptRecord r;
        r.prompt = rj.at("prompt").get<std::string>();
        r.domain = rj.at("domain").get<std::string>();
        for (const auto& cj : rj.at("continuations")) {
            r.continuations.push_back({cj.at("text").get<std::string>(), cj.at("score").get<double>()});
        }
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace

EvalReport run_eval(const EvalInputs& in, const SamplerConfig& cfg) {
    if (in.model == nullptr || in.tokenizer == nullptr || in.scorer == nullptr) {
        throw std::invalid_argument("run_eval: model, tokenizer and scorer are required");
    }
    if (in.id_prompts.empty() || in.ood_prompts.empty()) {
        throw std::invalid_argument("run_eval: prompt sets must be non-empty");
    }

    EvalReport report;
    report.seed = cfg.seed;
    report.threshold = in.threshold;
    report.config_hashes = in.config_hashes;

    PromptEval id = eval_prompt_set(in, in.id_prompts, cfg, /*set_tag=*/0);
    PromptEval ood = eval_prompt_set(in, in.ood_prompts, cfg, /*set_tag=*/1);

    report.metrics.tp_id = toxicity_probability(id.scores, in.threshold);
    report.metrics.tp_ood = toxicity_probability(ood.scores, in.threshold);
    report.metrics.emt_id = expected_max_toxicity(id.scores);
    report.metrics.emt_ood = expected_max_toxicity(ood.scores);

    std::vector<double> dist1 = id.dist1, dist2 = id.dist2, dist3 = id.dist3, ppl = id.continuation_ppl;
    dist1.insert(dist1.end(), ood.dist1.begin(), ood.dist1.end());
    dist2.insert(dist2.end(), ood.dist2.begin(), ood.dist2.end());
    dist3.insert(dist3.end(), ood.dist3.begin(), ood.dist3.end());
    ppl.insert(ppl.end(), ood.continuation_ppl.begin(), ood.continuation_ppl.end());
    report.metrics.dist1 = mean_of(dist1);
    report.metrics.dist2 = mean_of(dist2);
    report.metrics.dist3 = mean_of(dist3);
    if (in.reference != nullptr) {
        if (ppl.empty()) throw std::runtime_error("run_eval: no non-empty continuations to score perplexity");
        report.metrics.ppl = mean_of(ppl);
    }
    if (!in.tasks.empty()) {
        report.metrics.accuracy = few_shot_accuracy(*in.model, *in.tokenizer, in.tasks);
    }

    report.id_records = std::move(id.records);
    report.ood_records = std::move(ood.records);
    return report;
}

void EvalReport::save(const std::string& path) const {
    nlohmann::json j{
        {"metrics",
         {{"tp_id", metrics.tp_id},
          {"tp_ood", metrics.tp_ood},
          {"emt_id", metrics.emt_id},
          {"emt_ood", metrics.emt_ood},
          {"ppl", metrics.ppl},
          {"dist1", metrics.dist1},
          {"dist2", metrics.dist2},
          {"dist3", metrics.dist3},
          {"accuracy", metrics.accuracy}}},
        {"seed", seed},
        {"threshold", threshold},
        {"config_hashes", config_hashes},
        {"id_records", records_json(id_records)},
        {"ood_records", records_json(ood_records)},
    };
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("report: cannot write " + path);
    out << j.dump(2) << "\n";
}

EvalReport EvalReport::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("report: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("report: corrupt JSON in " + path);
    EvalReport r;
    const auto& m = j.at("metrics");
    r.metrics.tp_id = m.at("tp_id").get<double>();
    r.metrics.tp_ood = m.at("tp_ood").get<double>();
    r.metrics.emt_id = m.at("emt_id").get<double>();
    r.metrics.emt_ood = m.at("emt_ood").get<double>();
    r.metrics.ppl = m.at("ppl").get<double>();
    r.metrics.dist1 = m.at("dist1").get<double>();
    r.metrics.dist2 = m.at("dist2").get<double>();
    r.metrics.dist3 = m.at("dist3").get<double>();
    r.metrics.accuracy = m.at("accuracy").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.threshold = j.at("threshold").get<double>();
    r.config_hashes = j.at("config_hashes").get<std::map<std::string, std::string>>();
    r.id_records = records_from_json(j.at("id_records"));
    r.ood_records = records_from_json(j.at("ood_records"));
    return r;
}

namespace {

void accumulate(EvalMetrics& acc, const EvalMetrics& x, bool square) {
    auto add = [square](double& a, double v) { a += square ? v * v : v; };
    add(acc.tp_id, x.tp_id);
    add(acc.tp_ood, x.tp_ood);
    add(acc.emt_id, x.emt_id);
    add(acc.emt_ood, x.emt_ood);
    add(acc.ppl, x.ppl);
    add(acc.dist1, x.dist1);
    add(acc.dist2, x.dist2);
    add(acc.dist3, x.dist3);
    add(acc.accuracy, x.accuracy);
}

void scale_metrics(EvalMetrics& m, double c) {
    m.tp_id *= c;
    m.tp_ood *= c;
    m.emt_id *= c;
    m.emt_ood *= c;
    m.ppl *= c;
    m.dist1 *= c;
    m.dist2 *= c;
    m.dist3 *= c;
    m.accuracy *= c;
}

} // namespace

AggregateMetrics aggregate_metrics(const std::vector<EvalMetrics>& per_seed) {
    if (per_seed.empty()) throw std::invalid_argument("aggregate_metrics: no runs");
    AggregateMetrics agg;
    agg.runs = per_seed.size();
    EvalMetrics sum{}, sq{};
    scale_metrics(sum, 0.0);
    scale_metrics(sq, 0.0);
    sum.accuracy = 0.0;
    sq.accuracy = 0.0;
    for (const auto& m : per_seed) {
        accumulate(sum, m, false);
        accumulate(sq, m, true);
    }
    const double inv_n = 1.0 / static_cast<double>(per_seed.size());
    agg.mean = sum;
    scale_metrics(agg.mean, inv_n);
    EvalMetrics ex2 = sq;
    scale_metrics(ex2, inv_n);
    auto dev = [](double e2, double mu) { return std::sqrt(std::max(0.0, e2 - mu * mu)); };
    agg.stddev.tp_id = dev(ex2.tp_id, agg.mean.tp_id);
    agg.stddev.tp_ood = dev(ex2.tp_ood, agg.mean.tp_ood);
    agg.stddev.emt_id = dev(ex2.emt_id, agg.mean.emt_id);
    agg.stddev.emt_ood = dev(ex2.emt_ood, agg.mean.emt_ood);
    agg.stddev.ppl = dev(ex2.ppl, agg.mean.ppl);
    agg.stddev.dist1 = dev(ex2.dist1, agg.mean.dist1);
    agg.stddev.dist2 = dev(ex2.dist2, agg.mean.dist2);
    agg.stddev.dist3 = dev(ex2.dist3, agg.mean.dist3);
    agg.stddev.accuracy = dev(ex2.accuracy, agg.mean.accuracy);
    return agg;
}

} // namespace detoxlab
