// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab.h"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string>

#include "detoxlab/pipeline.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

} // namespace

struct dtx_session {
    detoxlab::Pipeline pipeline;
    std::string last_message;

    dtx_session(detoxlab::RunConfig cfg, std::string out_dir)
        : pipeline(std::move(cfg), std::move(out_dir)) {}
};

extern "C" {

const char* dtx_version(void) { return "0.1.0"; }

const char* dtx_last_error(void) { return g_last_error.c_str(); }

dtx_session* dtx_session_open(const char* config_path, const char* out_dir, long seed) {
    g_last_error.clear();
    if (out_dir == nullptr || out_dir[0] == '\0') {
        set_error("out_dir is required");
        return nullptr;
    }
    try {
        detoxlab::RunConfig cfg = (config_path == nullptr || config_path[0] == '\0')
                                      ? detoxlab::RunConfig::defaults()
                                      : detoxlab::RunConfig::load(config_path);
        if (seed >= 0) {
            // CLI seed override: rotate the seed list to start at `seed`.
            cfg.seeds.clear();
            for (long k = 0; k < 5; ++k) cfg.seeds.push_back(static_cast<std::uint64_t>(seed + k));
        }
        return new dtx_session(std::move(cfg), out_dir);
    } catch (const std::exception& e) {
        set_error(e.what());
        return nullptr;
    }
}

void dtx_session_close(dtx_session* session) { delete session; }

int dtx_stage_count(void) {
    return static_cast<int>(detoxlab::Pipeline::stage_names().size());
}

const char* dtx_stage_name(int index) {
    const auto& names = detoxlab::Pipeline::stage_names();
    if (index < 0 || static_cast<std::size_t>(index) >= names.size()) return nullptr;
    return names[static_cast<std::size_t>(index)].c_str();
}

dtx_status dtx_run_stage(dtx_session* session, const char* stage, int* skipped) {
    g_last_error.clear();
    if (session == nullptr || stage == nullptr) {
        set_error("null session or stage");
        return DTX_ERR_INVALID;
    }
    const auto& names = detoxlab::Pipeline::stage_names();
    if (std::find(names.begin(), names.end(), stage) == names.end()) {
        set_error("unknown stage '" + std::string(stage) + "'");
        return DTX_ERR_INVALID;
    }
    try {
        detoxlab::StageResult result = session->pipeline.run_stage(stage);
        session->last_message = result.message;
        if (skipped != nullptr) *skipped = result.skipped ? 1 : 0;
        return DTX_OK;
    } catch (const std::invalid_argument& e) {
        set_error("[" + std::string(stage) + "] " + e.what());
        return DTX_ERR_CONFIG;
    } catch (const std::exception& e) {
        set_error("[" + std::string(stage) + "] " + e.what());
        return DTX_ERR_STAGE;
    }
}

dtx_status dtx_run_pipeline(dtx_session* session) {
    g_last_error.clear();
    if (session == nullptr) {
        set_error("null session");
        return DTX_ERR_INVALID;
    }
    try {
        std::string message;
        for (const detoxlab::StageResult& r : session->pipeline.run_all()) {
            message += r.stage + (r.skipped ? " (cached): " : ": ") + r.message + "\n";
        }
        session->last_message = message;
        return DTX_OK;
    } catch (const std::exception& e) {
        set_error(e.what());
        return DTX_ERR_STAGE;
    }
}

dtx_status dtx_write_default_config(const char* path) {
    g_last_error.clear();
    if (path == nullptr || path[0] == '\0') {
        set_error("path is required");
        return DTX_ERR_INVALID;
    }
    try {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw std::runtime_error(std::string("cannot write ") + path);
        out << detoxlab::RunConfig::defaults().to_json().dump(2) << "\n";
        return DTX_OK;
    } catch (const std::exception& e) {
        set_error(e.what());
        return DTX_ERR_IO;
    }
}

const char* dtx_last_message(const dtx_session* session) {
    if (session == nullptr) return "";
    return session->last_message.c_str();
}

} // extern "C"
