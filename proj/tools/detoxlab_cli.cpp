// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Links only the C API, so it doubles as a living
// example of driving the shared library.
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "detoxlab.h"

namespace {

int run_stage_command(const std::string& stage, const std::string& config, const std::string& out,
                      long seed) {
    dtx_session* session = dtx_session_open(config.empty() ? nullptr : config.c_str(), out.c_str(), seed);
    if (session == nullptr) {
        std::fprintf(stderr, "error: %s\n", dtx_last_error());
        return 2;
    }
    int skipped = 0;
    const dtx_status status = dtx_run_stage(session, stage.c_str(), &skipped);
    if (status != DTX_OK) {
        std::fprintf(stderr, "error: %s\n", dtx_last_error());
        dtx_session_close(session);
        return static_cast<int>(status);
    }
    std::printf("%s%s: %s\n", stage.c_str(), skipped ? " (cached)" : "", dtx_last_message(session));
    dtx_session_close(session);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"detoxlab - desk-scale language-model detoxification via distilled text"};
    app.require_subcommand(1);

    std::string config;
    std::string out = "artifacts";
    long seed = -1;

    struct StageCommand {
        const char* name;
        const char* help;
    };
    const std::vector<StageCommand> stages = {
        {"gen-corpus", "generate the synthetic corpora, prompts and lexicon"},
        {"train", "train the base, reference and transfer models"},
        {"toxify", "fine-tune the toxic model on the toxic corpus"},
        {"distill", "distill detoxifying text via contrastive decoding"},
        {"detox", "fine-tune targets on the distilled text"},
        {"baseline", "build the comparison methods' artifacts"},
        {"eval", "evaluate every configured method"},
        {"verify-taylor", "run the first-order alignment study"},
        {"tune", "grid-search hyperparameters under the perplexity ceiling"},
        {"report", "print the aggregated results table"},
    };
    for (const auto& sc : stages) {
        CLI::App* sub = app.add_subcommand(sc.name, sc.help);
        sub->add_option("--config", config, "run configuration JSON (defaults when omitted)");
        sub->add_option("--seed", seed, "override the run seed list start");
        sub->add_option("--out", out, "artifact directory");
    }
    CLI::App* run = app.add_subcommand("run", "run the whole pipeline (gen-corpus through verify-taylor)");
    run->add_option("--config", config, "run configuration JSON (defaults when omitted)");
    run->add_option("--seed", seed, "override the run seed list start");
    run->add_option("--out", out, "artifact directory");

    CLI::App* init = app.add_subcommand("init-config", "write the default configuration to a file");
    std::string init_path = "detoxlab.json";
    init->add_option("path", init_path, "output path");

    CLI::App* version = app.add_subcommand("version", "print the library version");

    CLI11_PARSE(app, argc, argv);

    if (version->parsed()) {
        std::printf("detoxlab %s\n", dtx_version());
        return 0;
    }
    if (init->parsed()) {
        if (dtx_write_default_config(init_path.c_str()) != DTX_OK) {
            std::fprintf(stderr, "error: %s\n", dtx_last_error());
            return 2;
        }
        std::printf("wrote %s\n", init_path.c_str());
        return 0;
    }
    if (run->parsed()) {
        dtx_session* session = dtx_session_open(config.empty() ? nullptr : config.c_str(), out.c_str(), seed);
        if (session == nullptr) {
            std::fprintf(stderr, "error: %s\n", dtx_last_error());
            return 2;
        }
        const dtx_status status = dtx_run_pipeline(session);
        if (status != DTX_OK) {
            std::fprintf(stderr, "error: %s\n", dtx_last_error());
            dtx_session_close(session);
            return static_cast<int>(status);
        }
        std::printf("%s", dtx_last_message(session));
        dtx_session_close(session);
        return 0;
    }
    for (const auto& sc : stages) {
        if (app.get_subcommand(sc.name)->parsed()) {
            return run_stage_command(sc.name, config, out, seed);
        }
    }
    std::fprintf(stderr, "error: no subcommand\n");
    return 2;
}
