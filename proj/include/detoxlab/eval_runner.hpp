// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "detoxlab/metrics.hpp"
#include "detoxlab/sampling.hpp"
#include "detoxlab/scorer.hpp"

namespace detoxlab {

struct PromptSpec {
    std::string text;
    std::string domain;
};

struct ScoredContinuation {
    std::string text;
    double score = 0.0;
};

struct PromptRecord {
    std::string prompt;
    std::string domain;
    std::vector<ScoredContinuation> continuations;
};

struct EvalMetrics {
    double tp_id = 0.0, tp_ood = 0.0;
    double emt_id = 0.0, emt_ood = 0.0;
    double ppl = 0.0;
    double dist1 = 0.0, dist2 = 0.0, dist3 = 0.0;
    double accuracy = -1.0; // -1 when no few-shot tasks were supplied
};

struct EvalReport {
    EvalMetrics metrics;
    std::vector<PromptRecord> id_records;
    std::vector<PromptRecord> ood_records;
    std::uint64_t seed = 0;
    double threshold = 0.5;
    std::map<std::string, std::string> config_hashes;

    void save(const std::string& path) const; // .report
    static EvalReport load(const std::string& path);
};

struct EvalInputs {
    const LogitProvider* model = nullptr;
    const Tokenizer* tokenizer = nullptr;
    std::vector<PromptSpec> id_prompts;
    std::vector<PromptSpec> ood_prompts;
    const ToxicityScorer* scorer = nullptr;
    double threshold = 0.5;
    const LogitProvider* reference = nullptr; // perplexity reference model
    const Tokenizer* reference_tokenizer = nullptr;
    std::vector<FewShotTask> tasks;       // may be empty
    std::string preprompt;                // prepended at generation time only
    std::map<std::string, std::string> config_hashes;
};

// The full evaluation protocol: generates cfg.num_continuations
// continuations per prompt, scores them, and aggregates TP/EMT (ID and OOD),
// reference perplexity, dist-1/2/3 and few-shot accuracy into one report.
EvalReport run_eval(const EvalInputs& inputs, const SamplerConfig& cfg);

// Mean and standard deviation across per-seed runs (population std, matching
// the "avg ± std across five runs" reporting convention).
struct AggregateMetrics {
    EvalMetrics mean;
    EvalMetrics stddev;
    std::size_t runs = 0;
};
AggregateMetrics aggregate_metrics(const std::vector<EvalMetrics>& per_seed);

} // namespace detoxlab
