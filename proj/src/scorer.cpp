// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/scorer.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace detoxlab {

std::vector<std::string> split_words_lower(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            cur += static_cast<char>(std::tolower(ch));
        } else if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

LexiconScorer::LexiconScorer(std::vector<LexiconEntry> entries, double base_weight)
    : entries_(std::move(entries)), base_weight_(base_weight) {
    if (!(base_weight > 0.0 && base_weight < 1.0)) {
        throw std::invalid_argument("lexicon scorer: base weight must be in (0,1)");
    }
    for (const auto& e : entries_) {
        if (e.term.empty()) throw std::invalid_argument("lexicon scorer: empty term");
        if (e.weight < 0.0) throw std::invalid_argument("lexicon scorer: negative weight for " + e.term);
        std::string key;
        for (unsigned char ch : e.term) key += static_cast<char>(std::tolower(ch));
        weight_by_term_[key] = e.weight;
    }
}

double LexiconScorer::weighted_hits(const std::string& text) const {
    double h = 0.0;
    for (const std::string& w : split_words_lower(text)) {
        auto it = weight_by_term_.find(w);
        if (it != weight_by_term_.end()) h += it->second;
    }
    return h;
}

double LexiconScorer::score(const std::string& text) const {
    const double h = weighted_hits(text);
    if (h <= 0.0) return 0.0;
    return 1.0 - std::pow(1.0 - base_weight_, h);
}

std::vector<LexiconEntry> load_lexicon_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("lexicon: cannot open " + path);
    std::vector<LexiconEntry> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        LexiconEntry e;
        std::string weight;
        if (!std::getline(ss, e.term, '\t') || !std::getline(ss, weight, '\t') ||
            !std::getline(ss, e.domain)) {
            throw std::runtime_error("lexicon: bad line " + std::to_string(lineno) + " in " + path);
        }
        e.weight = std::stod(weight);
        entries.push_back(std::move(e));
    }
    if (entries.empty()) throw std::runtime_error("lexicon: no entries in " + path);
    return entries;
}

void save_lexicon_tsv(const std::vector<LexiconEntry>& entries, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("lexicon: cannot write " + path);
    for (const auto& e : entries) {
        out << e.term << "\t" << e.weight << "\t" << e.domain << "\n";
    }
}

} // namespace detoxlab
