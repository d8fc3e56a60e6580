// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/bigram.hpp"

#include <cmath>
#include <stdexcept>

namespace detoxlab {

BigramLM::BigramLM(int vocab, int eos, double smoothing)
    : vocab_(vocab), eos_(eos), smoothing_(smoothing),
      counts_(static_cast<std::size_t>(vocab) * static_cast<std::size_t>(vocab), 0.0) {
    if (vocab < 2) throw std::invalid_argument("bigram: vocab must be >= 2");
    if (eos < 0 || eos >= vocab) throw std::invalid_argument("bigram: eos out of range");
    if (!(smoothing > 0.0)) throw std::invalid_argument("bigram: smoothing must be positive");
}

BigramLM BigramLM::from_sequences(int vocab, int eos, double smoothing,
                                  const std::vector<std::vector<int>>& sequences) {
    BigramLM m(vocab, eos, smoothing);
    for (const auto& seq : sequences) {
        int prev = eos;
        for (int id : seq) {
            m.add_count(prev, id);
            prev = id;
        }
        m.add_count(prev, eos);
    }
    return m;
}

double BigramLM::count(int prev, int next) const {
    return counts_[static_cast<std::size_t>(prev) * static_cast<std::size_t>(vocab_) +
                   static_cast<std::size_t>(next)];
}

void BigramLM::set_count(int prev, int next, double c) {
    if (c < 0.0) throw std::invalid_argument("bigram: negative count");
    counts_[static_cast<std::size_t>(prev) * static_cast<std::size_t>(vocab_) + static_cast<std::size_t>(next)] = c;
}

void BigramLM::add_count(int prev, int next, double c) {
    counts_[static_cast<std::size_t>(prev) * static_cast<std::size_t>(vocab_) + static_cast<std::size_t>(next)] += c;
}

void BigramLM::set_row(int prev, const std::vector<double>& counts) {
    if (counts.size() != static_cast<std::size_t>(vocab_)) throw std::invalid_argument("bigram: bad row size");
    for (int j = 0; j < vocab_; ++j) set_count(prev, j, counts[static_cast<std::size_t>(j)]);
}

void BigramLM::set_counts(std::vector<double> counts) {
    if (counts.size() != counts_.size()) throw std::invalid_argument("bigram: bad counts size");
    counts_ = std::move(counts);
}

std::vector<double> BigramLM::row_logprobs(int prev) const {
    if (prev < 0 || prev >= vocab_) throw std::out_of_range("bigram: row out of range");
    double row_sum = 0.0;
    for (int j = 0; j < vocab_; ++j) row_sum += count(prev, j);
    const double denom = row_sum + static_cast<double>(vocab_) * smoothing_;
    std::vector<double> out(static_cast<std::size_t>(vocab_));
    for (int j = 0; j < vocab_; ++j) {
        out[static_cast<std::size_t>(j)] = std::log((count(prev, j) + smoothing_) / denom);
    }
    return out;
}

std::vector<double> BigramLM::logprobs_impl(const std::vector<int>& prefix) const {
    return row_logprobs(prefix.empty() ? eos_ : prefix.back());
}

} // namespace detoxlab
