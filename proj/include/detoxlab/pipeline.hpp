// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "detoxlab/config.hpp"

namespace detoxlab {

// Fixed artifact layout so tests (and humans) can rely on paths.
struct PipelinePaths {
    std::string root;
    std::string corpora;
    std::string ckpts;
    std::string distill;
    std::string reports;
    std::string tuning;
    std::string stamps;
    std::string logs;

    static PipelinePaths at(const std::string& out_dir);
    void create() const;
};

struct StageResult {
    std::string stage;
    bool skipped = false; // stamp hit: inputs, outputs and config unchanged
    std::string message;
};

// Orchestrates the experiment: gen-corpus -> train -> toxify -> distill ->
// detox -> baseline -> eval -> verify-taylor (+ tune, report on demand).
// Every stage writes a stamp (config hash + input hashes + outputs); reruns
// skip stages whose stamps still match, which makes the pipeline resumable
// from any completed stage. Loading an artifact whose recorded provenance
// disagrees with the current upstream files is an error.
class Pipeline {
public:
    Pipeline(RunConfig cfg, std::string out_dir);

    static const std::vector<std::string>& stage_names();

    StageResult run_stage(const std::string& stage);
    std::vector<StageResult> run_all(); // all stages except tune and report

    const PipelinePaths& paths() const { return paths_; }
    const RunConfig& config() const { return cfg_; }

private:
    StageResult gen_corpus_stage();
    StageResult train_stage();
    StageResult toxify_stage();
    StageResult distill_stage();
    StageResult detox_stage();
    StageResult baseline_stage();
    StageResult eval_stage();
    StageResult verify_taylor_stage();
    StageResult tune_stage();
    StageResult report_stage();

    nlohmann::json stage_config(const std::string& stage) const;
    bool up_to_date(const std::string& stage, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) const;
    void write_stamp(const std::string& stage, const std::vector<std::string>& inputs,
                     const std::vector<std::string>& outputs) const;

    RunConfig cfg_;
    PipelinePaths paths_;
};

// Content fingerprint of a file on disk (hex).
std::string file_hash_hex(const std::string& path);

} // namespace detoxlab
