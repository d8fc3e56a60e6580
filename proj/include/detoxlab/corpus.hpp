// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "detoxlab/tokenizer.hpp"

namespace detoxlab {

// One tagged example. Text is the source of truth; token sequences are
// derived per model via its tokenizer.
struct CorpusRecord {
    std::string text;
    std::string label;  // "clean" | "toxic"
    std::string domain; // template domain tag, e.g. toxic lexicon family
};

struct Corpus {
    std::vector<CorpusRecord> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
    Corpus filter_label(const std::string& label) const;
    std::vector<std::vector<int>> encode_all(const Tokenizer& tok) const;
};

// Line-delimited JSON records {text, label, domain}, UTF-8.
Corpus load_corpus_jsonl(const std::string& path);
void save_corpus_jsonl(const Corpus& corpus, const std::string& path);

struct CorpusSplits {
    Corpus train, valid, test;
};

// Disjoint, seed-reproducible splits.
CorpusSplits split_corpus(const Corpus& corpus, double valid_frac, double test_frac, std::uint64_t seed);

} // namespace detoxlab
