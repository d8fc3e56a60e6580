// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "detoxlab/baselines.hpp"
#include "detoxlab/bigram.hpp"
#include "detoxlab/loglinear.hpp"
#include "detoxlab/transformer.hpp"

namespace detoxlab {

// Versioned checkpoint container (.ckpt): magic + version + JSON header
// (kind, dims, tokenizer, layout, content hash, provenance) followed by the
// little-endian f64 payload in layout order. Round trips are bit-exact.
using Provenance = std::map<std::string, std::string>;

struct CheckpointInfo {
    std::string kind; // "transformer" | "bigram" | "loglinear"
    std::string param_hash;
    Provenance provenance;
};

void save_checkpoint(const TransformerLM& model, const std::string& path, const Provenance& prov = {});
void save_checkpoint(const BigramLM& model, const std::string& path, const Provenance& prov = {});
void save_checkpoint(const LogLinearLM& model, const std::string& path, const Provenance& prov = {});

TransformerLM load_transformer_checkpoint(const std::string& path);
BigramLM load_bigram_checkpoint(const std::string& path);
LogLinearLM load_loglinear_checkpoint(const std::string& path);

// Steering matrices reuse the same container with kind "steer".
void save_steering_checkpoint(const SteeringMatrix& steer, const std::string& path);
SteeringMatrix load_steering_checkpoint(const std::string& path);

// Header-only read (kind, hash, provenance) without loading the payload.
CheckpointInfo read_checkpoint_info(const std::string& path);

// Fingerprint of a model's parameters, also recorded inside checkpoints.
std::string param_hash_hex(const ParamVector& pv);

} // namespace detoxlab
