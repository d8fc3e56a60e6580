// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace detoxlab {

// Pluggable toxicity scorer: text -> score in [0,1]. Deterministic,
// score("") == 0, monotone nondecreasing in lexicon hits.
class ToxicityScorer {
public:
    virtual ~ToxicityScorer() = default;
    virtual double score(const std::string& text) const = 0;
};

struct LexiconEntry {
    std::string term;
    double weight = 1.0;
    std::string domain;
};

// Reference implementation: saturating aggregation over weighted term hits,
//   score = 1 - (1 - w)^h,  h = sum of term weights over occurrences,
// with w chosen so a single full-weight hit crosses the 0.5 threshold.
class LexiconScorer : public ToxicityScorer {
public:
    explicit LexiconScorer(std::vector<LexiconEntry> entries, double base_weight = 0.6);

    double score(const std::string& text) const override;
    // Weighted hit count h for the given text.
    double weighted_hits(const std::string& text) const;

    const std::vector<LexiconEntry>& entries() const { return entries_; }
    double base_weight() const { return base_weight_; }

private:
    std::vector<LexiconEntry> entries_;
    std::unordered_map<std::string, double> weight_by_term_;
    double base_weight_;
};

// Lowercased word list (alphanumeric runs) used for lexicon matching and the
// word-set analyses.
std::vector<std::string> split_words_lower(const std::string& text);

// Lexicon file: line-delimited `term<TAB>weight<TAB>domain`.
std::vector<LexiconEntry> load_lexicon_tsv(const std::string& path);
void save_lexicon_tsv(const std::vector<LexiconEntry>& entries, const std::string& path);

} // namespace detoxlab
