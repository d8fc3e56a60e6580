// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/distill.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "detoxlab/checkpoint.hpp"

namespace detoxlab {

namespace {

// Desk-scale models are ~4 orders of magnitude smaller than the published
// targets; the presets keep the published 5:1 pairing. Calibrated so the low
// preset detoxifies the desk base model without a perplexity cliff.
constexpr double kPaperHigh = 5e-5;
constexpr double kPaperLow = 1e-5;
constexpr double kDeskHigh = 1e-4;
constexpr double kDeskLow = 2e-5;

} // namespace

double learning_rate_preset(const std::string& name) {
    if (name == "paper_high") return kPaperHigh;
    if (name == "paper_low") return kPaperLow;
    if (name == "desk_high") return kDeskHigh;
    if (name == "desk_low") return kDeskLow;
    throw std::invalid_argument("unknown learning-rate preset: " + name);
}

FineTuneConfig FineTuneConfig::toxic_defaults() {
    FineTuneConfig cfg;
    cfg.optimizer.kind = OptimizerKind::adamw;
    cfg.optimizer.learning_rate = kPaperLow;
    cfg.batch_size = 4;
    cfg.epochs = 3;
    cfg.steps = -1;
    return cfg;
}

FineTuneConfig FineTuneConfig::detox_defaults() {
    FineTuneConfig cfg;
    cfg.optimizer.kind = OptimizerKind::adamw;
    cfg.optimizer.learning_rate = kDeskHigh;
    cfg.batch_size = 8;
    cfg.epochs = 1;
    cfg.steps = -1;
    return cfg;
}

std::vector<std::string> DistilledText::decode_all(const Tokenizer& tok) const {
    std::vector<std::string> out;
    out.reserve(sequences.size());
    for (const auto& seq : sequences) out.push_back(tok.decode(seq));
    return out;
}

void save_distilled_text(const DistilledText& d, const Tokenizer& tok, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("distill: cannot write " + path);
    nlohmann::json header{
        {"record", "header"},
        {"source_hashes", {{"base", d.base_hash}, {"toxic", d.toxic_hash}}},
        {"seed", d.seed},
        {"duplicate_count", d.duplicate_count},
        {"config",
         {{"alpha", d.config.alpha},
          {"max_length", d.config.max_length},
          {"num_sequences", d.config.num_sequences},
          {"prompt", d.config.prompt}}},
    };
    out << header.dump() << "\n";
    for (const auto& seq : d.sequences) {
        nlohmann::json j{{"text", tok.decode(seq)},
                         {"token_ids", seq},
                         {"source_hashes", {{"base", d.base_hash}, {"toxic", d.toxic_hash}}},
                         {"seed", d.seed}};
        out << j.dump() << "\n";
    }
}

DistilledText load_distilled_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("distill: cannot open " + path);
    DistilledText d;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw std::runtime_error("distill: corrupt record in " + path);
        if (!have_header) {
            if (j.value("record", "") != "header") {
                throw std::runtime_error("distill: missing header in " + path);
            }
            d.base_hash = j.at("source_hashes").at("base").get<std::string>();
            d.toxic_hash = j.at("source_hashes").at("toxic").get<std::string>();
            d.seed = j.at("seed").get<std::uint64_t>();
            d.duplicate_count = j.at("duplicate_count").get<std::size_t>();
            const auto& cj = j.at("config");
            d.config.alpha = cj.at("alpha").get<double>();
            d.config.max_length = cj.at("max_length").get<int>();
            d.config.num_sequences = cj.at("num_sequences").get<int>();
            d.config.prompt = cj.at("prompt").get<std::vector<int>>();
            d.config.seed = d.seed;
            have_header = true;
            continue;
        }
        d.sequences.push_back(j.at("token_ids").get<std::vector<int>>());
    }
    if (!have_header) throw std::runtime_error("distill: empty file " + path);
    return d;
}

TransformerLM make_toxic_model(const TransformerLM& base, const Corpus& toxic_corpus,
                               const FineTuneConfig& cfg, TrainLog* log) {
    if (toxic_corpus.empty()) throw std::invalid_argument("make_toxic_model: empty toxic corpus");
    for (const auto& r : toxic_corpus.records) {
        if (r.label != "toxic") {
            throw std::invalid_argument("make_toxic_model: corpus contains non-toxic record (label '" +
                                        r.label + "'); a contaminated corpus invalidates the toxic vector");
        }
    }
    TransformerLM toxic = base;
    TrainConfig tc;
    tc.optimizer = cfg.optimizer;
    tc.epochs = cfg.epochs;
    tc.steps = cfg.steps;
    tc.batch_size = cfg.batch_size;
    tc.seed = cfg.seed;
    TrainLog local = train_lm(toxic, toxic_corpus.encode_all(base.tokenizer()), tc);
    if (log) *log = std::move(local);
    return toxic;
}

DistilledText distill_detox_text(const TransformerLM& base, const TransformerLM& toxic,
                                 const ContrastiveConfig& cfg) {
    if (!base.tokenizer().compatible_with(toxic.tokenizer())) {
        throw std::invalid_argument("distill_detox_text: base and toxic tokenizers differ");
    }
    check_same_layout(base.params(), toxic.params(), "distill_detox_text");

    ContrastiveProvider scorer(base, toxic, cfg.alpha);
    DistilledText d;
    d.sequences = sample_distillation(scorer, cfg);
    d.base_hash = param_hash_hex(base.params());
    d.toxic_hash = param_hash_hex(toxic.params());
    d.config = cfg;
    d.seed = cfg.seed;

    // Sampling is independent, without dedup; duplicates are only counted.
    std::set<std::vector<int>> seen;
    for (const auto& seq : d.sequences) {
        if (!seen.insert(seq).second) ++d.duplicate_count;
    }
    return d;
}

TrainLog detox_finetune(TrainableLM& target, const DistilledText& text, const Tokenizer& source_tok,
                        const FineTuneConfig& cfg) {
    if (text.sequences.empty()) throw std::invalid_argument("detox_finetune: empty distilled text");

    std::vector<std::vector<int>> sequences;
    if (target.tokenizer().compatible_with(source_tok)) {
        sequences = text.sequences;
    } else {
        // Cross-tokenizer transfer: text is the interchange format.
        sequences.reserve(text.sequences.size());
        for (const auto& seq : text.sequences) {
            sequences.push_back(target.tokenizer().encode(source_tok.decode(seq)));
        }
    }

    TrainConfig tc;
    tc.optimizer = cfg.optimizer;
    tc.epochs = cfg.epochs;
    tc.steps = cfg.steps;
    tc.batch_size = cfg.batch_size;
    tc.seed = cfg.seed;
    return train_lm(target, sequences, tc);
}

} // namespace detoxlab
