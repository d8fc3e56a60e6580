/* Copyright (c) 2026 detoxlab authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C API for the detoxlab core. A session wraps one run configuration and one
 * artifact directory; stages are executed by name. All functions return
 * dtx_status (0 on success); dtx_last_error() describes the most recent
 * failure on the calling thread.
 */
#ifndef DETOXLAB_H
#define DETOXLAB_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct dtx_session dtx_session;

typedef enum dtx_status {
    DTX_OK = 0,
    DTX_ERR_CONFIG = 1,   /* bad or missing configuration */
    DTX_ERR_IO = 2,       /* filesystem problems */
    DTX_ERR_STAGE = 3,    /* a pipeline stage failed */
    DTX_ERR_INVALID = 4,  /* bad arguments (null handle, unknown stage) */
    DTX_ERR_INTERNAL = 5
} dtx_status;

const char* dtx_version(void);

/* Message describing the most recent error on this thread ("" if none). */
const char* dtx_last_error(void);

/* Opens a session from a JSON config file (NULL or "" loads the built-in
 * defaults) rooted at out_dir. seed >= 0 overrides the config's first run
 * seed. Returns NULL on failure (see dtx_last_error). */
dtx_session* dtx_session_open(const char* config_path, const char* out_dir, long seed);
void dtx_session_close(dtx_session* session);

/* Stage registry, e.g. for CLI usage lines. */
int dtx_stage_count(void);
const char* dtx_stage_name(int index);

/* Runs one named stage ("gen-corpus", "train", "toxify", "distill",
 * "detox", "baseline", "eval", "verify-taylor", "tune", "report").
 * skipped, when non-NULL, is set to 1 if the stage was already up to date. */
dtx_status dtx_run_stage(dtx_session* session, const char* stage, int* skipped);

/* Runs every stage through verify-taylor. */
dtx_status dtx_run_pipeline(dtx_session* session);

/* Writes the default run configuration as JSON to path. */
dtx_status dtx_write_default_config(const char* path);

/* Human-readable summary of the last stage result ("" before any run). */
const char* dtx_last_message(const dtx_session* session);

#ifdef __cplusplus
}
#endif

#endif /* DETOXLAB_H */
