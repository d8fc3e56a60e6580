// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "detoxlab/baselines.hpp"
#include "detoxlab/distill.hpp"
#include "detoxlab/sampling.hpp"
#include "detoxlab/train.hpp"
#include "detoxlab/transformer.hpp"

namespace detoxlab {

struct CorpusGenConfig {
    std::uint64_t seed = 11;
    int pretrain_sentences = 6000;
    int toxic_sentences = 1200;
    int heldout_sentences = 2000; // split into validation/test pools
    double toxic_fraction = 0.05; // toxic share of the pretraining mix
    int prompt_tokens = 2;        // words kept when cutting prompts
    int id_prompts = 18;          // per prompt set (validation and test each)
    int ood_prompts = 18;
};

struct ModelSpec {
    TransformerConfig dims;   // vocab filled in from the generated vocabulary
    TrainConfig train;
    std::uint64_t init_seed = 0;
};

struct ScorerConfig {
    double base_weight = 0.6;
    double threshold = 0.5;
};

struct DetoxConfig {
    FineTuneConfig finetune;                       // batch 8, adamw
    std::vector<std::string> learning_rate_presets; // evaluated presets, high first
};

struct TuneGrid {
    std::vector<long> steps_grid;            // fine-tuning steps searched
    std::vector<std::string> lr_presets;     // unidetox / samples
    std::vector<double> ta_lambda_grid;
    std::vector<double> dexperts_beta_grid;
    std::vector<double> steer_eps_multiplier_grid;
    double ppl_ceiling_factor = 1.10;        // baselines may not exceed 1.10x
};

struct RunConfig {
    CorpusGenConfig corpus;
    ModelSpec base_model;
    ModelSpec reference_model;
    ModelSpec transfer_model;
    FineTuneConfig toxic_finetune;
    ContrastiveConfig distill;
    DetoxConfig detox;
    SamplerConfig sampler;
    ScorerConfig scorer;
    BaselineConfig baselines;
    SteerTrainConfig steer_train;
    TuneGrid tune;
    std::vector<std::uint64_t> seeds; // headline runs, five by default
    std::vector<std::string> eval_methods;

    nlohmann::json to_json() const;
    std::string config_hash() const; // fnv over the canonical dump

    static RunConfig defaults();
    static RunConfig from_json(const nlohmann::json& j); // unknown keys are errors
    static RunConfig load(const std::string& path);
};

// Markdown description of every accepted key; docs/config-schema.md must
// stay in sync (a test regenerates and compares).
std::string config_schema_markdown();

// Recursively rejects keys that the schema does not know about.
void validate_config_keys(const nlohmann::json& config);

} // namespace detoxlab
