// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "detoxlab.h"

namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const char* name) {
    const std::string dir = (fs::temp_directory_path() / name).string();
    fs::remove_all(dir);
    return dir;
}

std::string write_tiny_config(const std::string& dir) {
    fs::create_directories(dir);
    const std::string path = dir + "/config.json";
    std::ofstream out(path);
    out << R"JSON({
  "corpus": {"pretrain_sentences": 300, "toxic_sentences": 80, "heldout_sentences": 500,
             "toxic_fraction": 0.1, "id_prompts": 4, "ood_prompts": 3},
  "base_model": {"context": 20, "layers": 1, "d_model": 12, "heads": 2,
                 "train": {"epochs": 1, "learning_rate": 0.003}},
  "reference_model": {"context": 20, "layers": 1, "d_model": 12, "heads": 2, "train": {"epochs": 1}},
  "transfer_model": {"context": 20, "layers": 1, "d_model": 8, "heads": 2, "train": {"epochs": 1}},
  "toxic_finetune": {"epochs": 1, "learning_rate": 0.002},
  "distill": {"num_sequences": 6, "max_length": 6},
  "detox": {"steps": 4, "learning_rate_presets": ["desk_low"]},
  "sampler": {"num_continuations": 3, "max_new_tokens": 5},
  "seeds": [1],
  "eval_methods": ["base"]
})JSON";
    return path;
}

} // namespace

TEST_CASE("version and stage registry") {
    CHECK(std::strlen(dtx_version()) > 0);
    REQUIRE(dtx_stage_count() == 10);
    CHECK(std::string(dtx_stage_name(0)) == "gen-corpus");
    CHECK(std::string(dtx_stage_name(dtx_stage_count() - 1)) == "report");
    CHECK(dtx_stage_name(99) == nullptr);
}

TEST_CASE("error paths set dtx_last_error") {
    CHECK(dtx_session_open("/definitely/not/here.json", "/tmp/dtx_capi_none", -1) == nullptr);
    CHECK(std::strlen(dtx_last_error()) > 0);

    CHECK(dtx_session_open(nullptr, "", -1) == nullptr);
    CHECK(dtx_run_stage(nullptr, "train", nullptr) == DTX_ERR_INVALID);
}

TEST_CASE("bad config content is a config error") {
    const std::string dir = fresh_dir("dtx_capi_badcfg");
    fs::create_directories(dir);
    const std::string path = dir + "/bad.json";
    {
        std::ofstream out(path);
        out << R"({"sampler": {"nucleus": 0.5}})"; // unknown key
    }
    CHECK(dtx_session_open(path.c_str(), dir.c_str(), -1) == nullptr);
    CHECK(std::string(dtx_last_error()).find("sampler.nucleus") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("stages run end to end through the shared library") {
    const std::string dir = fresh_dir("dtx_capi_run");
    const std::string cfg = write_tiny_config(dir);
    dtx_session* session = dtx_session_open(cfg.c_str(), (dir + "/artifacts").c_str(), -1);
    REQUIRE(session != nullptr);

    int skipped = -1;
    CHECK(dtx_run_stage(session, "gen-corpus", &skipped) == DTX_OK);
    CHECK(skipped == 0);
    CHECK(std::strlen(dtx_last_message(session)) > 0);

    // Unknown stage names are invalid-argument errors.
    CHECK(dtx_run_stage(session, "trainz", &skipped) == DTX_ERR_INVALID);

    CHECK(dtx_run_stage(session, "train", &skipped) == DTX_OK);
    CHECK(dtx_run_stage(session, "toxify", &skipped) == DTX_OK);

    // Stamp hit on rerun.
    CHECK(dtx_run_stage(session, "train", &skipped) == DTX_OK);
    CHECK(skipped == 1);

    // Running eval before its inputs exist is a stage error with a message.
    dtx_session* fresh = dtx_session_open(cfg.c_str(), (dir + "/artifacts2").c_str(), -1);
    REQUIRE(fresh != nullptr);
    CHECK(dtx_run_stage(fresh, "eval", nullptr) == DTX_ERR_STAGE);
    CHECK(std::strlen(dtx_last_error()) > 0);
    dtx_session_close(fresh);

    dtx_session_close(session);
    fs::remove_all(dir);
}

TEST_CASE("default config writer") {
    const std::string dir = fresh_dir("dtx_capi_def");
    fs::create_directories(dir);
    const std::string path = dir + "/default.json";
    CHECK(dtx_write_default_config(path.c_str()) == DTX_OK);
    std::ifstream in(path);
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(contents.find("\"nucleus_p\": 0.9") != std::string::npos);
    CHECK(contents.find("\"num_sequences\": 640") != std::string::npos);
    CHECK(dtx_write_default_config(nullptr) == DTX_ERR_INVALID);
    fs::remove_all(dir);
}
