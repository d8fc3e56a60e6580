// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/train.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "detoxlab/rng.hpp"

namespace detoxlab {

void TrainLog::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("train log: cannot write " + path);
    out << "step\tloss\tloss_per_token\n";
    for (std::size_t i = 0; i < step_loss.size(); ++i) {
        out << i << "\t" << step_loss[i] << "\t" << step_loss_per_token[i] << "\n";
    }
}

std::vector<std::vector<int>> pack_blocks(const std::vector<std::vector<int>>& sequences, int block_size,
                                          int eos) {
    if (block_size < 2) throw std::invalid_argument("pack_blocks: block_size must be >= 2");
    std::vector<int> stream;
    stream.push_back(eos);
    for (const auto& seq : sequences) {
        stream.insert(stream.end(), seq.begin(), seq.end());
        if (seq.empty() || seq.back() != eos) stream.push_back(eos);
    }
    std::vector<std::vector<int>> blocks;
    const std::size_t bs = static_cast<std::size_t>(block_size);
    for (std::size_t off = 0; off + 1 < stream.size(); off += bs) {
        const std::size_t end = std::min(off + bs, stream.size());
        blocks.emplace_back(stream.begin() + static_cast<std::ptrdiff_t>(off),
                            stream.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return blocks;
}

TrainLog train_lm(TrainableLM& model, const std::vector<std::vector<int>>& sequences,
                  const TrainConfig& cfg) {
    if (sequences.empty()) throw std::invalid_argument("train_lm: empty corpus");
    if (cfg.batch_size < 1) throw std::invalid_argument("train_lm: batch_size must be >= 1");
    cfg.optimizer.validate();

    const int block_size = cfg.block_size > 0 ? cfg.block_size : model.context_limit();
    std::vector<std::vector<int>> blocks = pack_blocks(sequences, block_size, model.eos_id());
    if (blocks.empty()) throw std::invalid_argument("train_lm: corpus packs to zero blocks");

    TrainLog log;
    if (cfg.steps == 0 || (cfg.steps < 0 && cfg.epochs == 0)) return log;

    ParamVector params = model.params();
    OptimizerState state;
    long step = 0;
    const long step_budget = cfg.steps >= 0 ? cfg.steps : -1;

    std::vector<std::size_t> order(blocks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0;; ++epoch) {
        if (step_budget < 0 && epoch >= cfg.epochs) break;
        KeyedRng shuffle_rng(cfg.seed, 0xe90c + static_cast<std::uint64_t>(epoch));
        keyed_shuffle(order, shuffle_rng);
        for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
            if (step_budget >= 0 && step >= step_budget) return log;
            std::vector<std::vector<int>> batch;
            const std::size_t hi = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
            for (std::size_t i = at; i < hi; ++i) batch.push_back(blocks[order[i]]);

            double loss = 0.0;
            std::size_t predicted = 0;
            try {
                auto graph = model.loss_graph(batch);
                loss = graph.loss->value.item();
                predicted = graph.predicted_tokens;
                if (!std::isfinite(loss)) throw std::runtime_error("non-finite loss");
                ad::backward(graph.loss);
                ParamVector grads = model.grads_from(graph);
                optimizer_step(params, grads, cfg.optimizer, state);
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("train_lm: diverged at step " + std::to_string(step) + " (" +
                                         e.what() + ")");
            }
            model.set_params(params);

            log.step_loss.push_back(loss);
            log.step_loss_per_token.push_back(loss * static_cast<double>(batch.size()) /
                                              static_cast<double>(predicted));
            log.tokens += predicted;
            ++step;
            log.steps = step;
        }
        if (step_budget >= 0 && step >= step_budget) return log;
    }
    return log;
}

} // namespace detoxlab
