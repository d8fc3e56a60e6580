// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "detoxlab/config.hpp"

using namespace detoxlab;

TEST_CASE("defaults reproduce the published protocol constants") {
    const RunConfig cfg = RunConfig::defaults();

    // Distillation: alpha = 0.1, 640 sequences of up to 256 tokens, prompted
    // with the end-of-sequence token alone.
    CHECK(cfg.distill.alpha == 0.1);
    CHECK(cfg.distill.num_sequences == 640);
    CHECK(cfg.distill.max_length == 256);
    CHECK(cfg.distill.prompt.empty());

    // Detox fine-tuning: AdamW with batch size 8.
    CHECK(cfg.detox.finetune.optimizer.kind == OptimizerKind::adamw);
    CHECK(cfg.detox.finetune.batch_size == 8);
    CHECK(cfg.detox.finetune.optimizer.beta1 == 0.9);
    CHECK(cfg.detox.finetune.optimizer.beta2 == 0.999);

    // Evaluation: nucleus p = 0.9, 25 continuations of up to 20 tokens,
    // toxicity threshold 0.5.
    CHECK(cfg.sampler.nucleus_p == 0.9);
    CHECK(cfg.sampler.num_continuations == 25);
    CHECK(cfg.sampler.max_new_tokens == 20);
    CHECK(cfg.scorer.threshold == 0.5);

    // Tuning: steps in [1000..10000] and the 10% perplexity ceiling.
    CHECK(cfg.tune.ppl_ceiling_factor == 1.10);
    REQUIRE(cfg.tune.steps_grid.size() == 10);
    CHECK(cfg.tune.steps_grid.front() == 1000);
    CHECK(cfg.tune.steps_grid.back() == 10000);
    for (std::size_t i = 1; i < cfg.tune.steps_grid.size(); ++i) {
        CHECK(cfg.tune.steps_grid[i] - cfg.tune.steps_grid[i - 1] == 1000);
    }

    // Toxic fine-tuning keeps the published 3 epochs / batch 4 structure.
    CHECK(cfg.toxic_finetune.epochs == 3);
    CHECK(cfg.toxic_finetune.batch_size == 4);

    // Published baseline search ranges.
    CHECK(cfg.tune.ta_lambda_grid.front() == doctest::Approx(0.01));
    CHECK(cfg.tune.ta_lambda_grid.back() == doctest::Approx(0.2));
    CHECK(cfg.tune.dexperts_beta_grid.front() == doctest::Approx(0.1));
    CHECK(cfg.tune.dexperts_beta_grid.back() == doctest::Approx(2.0));
    CHECK(cfg.tune.steer_eps_multiplier_grid.front() == doctest::Approx(-0.1));
    CHECK(cfg.tune.steer_eps_multiplier_grid.back() == doctest::Approx(-2.0));

    // Five-seed reporting is the default convention.
    CHECK(cfg.seeds.size() == 5);
}

TEST_CASE("config JSON round trips") {
    const RunConfig cfg = RunConfig::defaults();
    const RunConfig again = RunConfig::from_json(cfg.to_json());
    CHECK(again.to_json() == cfg.to_json());
    CHECK(again.config_hash() == cfg.config_hash());
}

TEST_CASE("unknown keys are hard errors") {
    nlohmann::json j = RunConfig::defaults().to_json();
    j["sampler"]["nucleus"] = 0.5; // typo for nucleus_p
    CHECK_THROWS_WITH_AS(RunConfig::from_json(j), doctest::Contains("sampler.nucleus"),
                         std::invalid_argument);

    nlohmann::json top = nlohmann::json::object();
    top["corpuss"] = nlohmann::json::object();
    CHECK_THROWS_AS(RunConfig::from_json(top), std::invalid_argument);
}

TEST_CASE("partial configs inherit defaults") {
    nlohmann::json j = nlohmann::json::object();
    j["sampler"] = {{"num_continuations", 7}};
    const RunConfig cfg = RunConfig::from_json(j);
    CHECK(cfg.sampler.num_continuations == 7);
    CHECK(cfg.sampler.nucleus_p == 0.9);
    CHECK(cfg.distill.num_sequences == 640);
}

TEST_CASE("config hash changes with content") {
    RunConfig a = RunConfig::defaults();
    RunConfig b = a;
    b.sampler.nucleus_p = 0.8;
    CHECK(a.config_hash() != b.config_hash());
}

TEST_CASE("validation rejects malformed values") {
    nlohmann::json bad = nlohmann::json::object();
    bad["seeds"] = nlohmann::json::array();
    CHECK_THROWS_AS(RunConfig::from_json(bad), std::invalid_argument);

    nlohmann::json frac = nlohmann::json::object();
    frac["corpus"] = {{"toxic_fraction", 1.5}};
    CHECK_THROWS_AS(RunConfig::from_json(frac), std::invalid_argument);

    nlohmann::json prompt = nlohmann::json::object();
    prompt["distill"] = {{"prompt", "hello"}};
    CHECK_THROWS_AS(RunConfig::from_json(prompt), std::invalid_argument);
}

TEST_CASE("schema document stays in sync with the loader") {
    std::ifstream in("docs/config-schema.md");
    REQUIRE_MESSAGE(in.good(), "docs/config-schema.md missing (run from the repo root)");
    std::string on_disk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(on_disk == config_schema_markdown());
}
