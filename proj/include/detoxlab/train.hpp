// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "detoxlab/logit_provider.hpp"
#include "detoxlab/optim.hpp"

namespace detoxlab {

struct TrainConfig {
    OptimizerConfig optimizer;
    int epochs = 1;     // used when steps < 0
    long steps = -1;    // exact step budget; cycles epochs as needed
    int batch_size = 8;
    int block_size = 0; // 0 = model context length
    std::uint64_t seed = 0;
};

struct TrainLog {
    std::vector<double> step_loss;           // batch mean of per-block NLL sums
    std::vector<double> step_loss_per_token; // same, normalized by predicted tokens
    long steps = 0;
    std::size_t tokens = 0;

    void save(const std::string& path) const;
};

// Packs sequences into contiguous block_size windows of the stream
// [eos, seq1..., eos, seq2..., eos, ...]; sequences already ending in eos get
// no extra separator. Trailing windows shorter than 2 tokens are dropped.
std::vector<std::vector<int>> pack_blocks(const std::vector<std::vector<int>>& sequences, int block_size,
                                          int eos);

// Causal-LM training loop: deterministic given cfg.seed, loss logged per
// step, divergence (non-finite loss) aborts with the step index. Parameters
// are updated in place.
TrainLog train_lm(TrainableLM& model, const std::vector<std::vector<int>>& sequences,
                  const TrainConfig& cfg);

} // namespace detoxlab
