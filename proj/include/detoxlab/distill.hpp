// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "detoxlab/corpus.hpp"
#include "detoxlab/logit_provider.hpp"
#include "detoxlab/sampling.hpp"
#include "detoxlab/train.hpp"
#include "detoxlab/transformer.hpp"

namespace detoxlab {

// Fine-tuning stage settings. The published learning rates target
// billion-parameter models; desk presets rescale them but keep the 5:1 ratio.
struct FineTuneConfig {
    OptimizerConfig optimizer; // adamw by default
    int batch_size = 8;
    long steps = -1; // step budget; -1 = epoch-driven
    int epochs = 1;
    std::uint64_t seed = 0;

    static FineTuneConfig toxic_defaults(); // 3 epochs, batch 4, lr 1e-5 (adamw)
    static FineTuneConfig detox_defaults(); // batch 8, adamw, lr preset "desk_low"
};

// Named learning-rate presets: paper_high/paper_low are the published pair,
// desk_high/desk_low are the desk-scale pair at the same 5:1 ratio.
double learning_rate_preset(const std::string& name);

// Sequences distilled via masked contrastive decoding, with provenance tying
// them to the exact checkpoints that produced them.
struct DistilledText {
    std::vector<std::vector<int>> sequences; // token ids; terminal eos kept when present
    std::string base_hash;
    std::string toxic_hash;
    ContrastiveConfig config;
    std::uint64_t seed = 0;
    std::size_t duplicate_count = 0; // sequences identical to an earlier one

    std::vector<std::string> decode_all(const Tokenizer& tok) const;
};

// Line-delimited records {text, token_ids, source_hashes, seed}; .distill.
void save_distilled_text(const DistilledText& d, const Tokenizer& tok, const std::string& path);
DistilledText load_distilled_text(const std::string& path);

// Stage 1: fine-tune the base model on toxic-only text. Refuses corpora
// containing clean records (a contaminated corpus invalidates tau_toxic).
// Returns the toxic model; `log` receives the training trace when non-null.
TransformerLM make_toxic_model(const TransformerLM& base, const Corpus& toxic_corpus,
                               const FineTuneConfig& cfg, TrainLog* log = nullptr);

// Stage 2: sample cfg.num_sequences sequences through
// contrastive_scores -> plausibility_mask -> sample_next, prompted with eos.
DistilledText distill_detox_text(const TransformerLM& base, const TransformerLM& toxic,
                                 const ContrastiveConfig& cfg);

// Stage 3: fine-tune any trainable target on the distilled text. When the
// target tokenizer differs from `source_tok`, sequences are re-encoded
// through text (decode with source, encode with target) - the cross-model
// transfer path. Updates the target in place.
TrainLog detox_finetune(TrainableLM& target, const DistilledText& text, const Tokenizer& source_tok,
                        const FineTuneConfig& cfg);

} // namespace detoxlab
