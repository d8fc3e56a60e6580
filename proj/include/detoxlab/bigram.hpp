// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "detoxlab/logit_provider.hpp"

namespace detoxlab {

// Additively smoothed bigram model:
//   p(x_t | x_{t-1}) = (count + smoothing) / (row_sum + V * smoothing)
// Rows sum to 1 exactly in closed form, which makes this the brute-force
// oracle for every decoding-equivalence check.
class BigramLM : public LogitProvider {
public:
    BigramLM(int vocab, int eos, double smoothing);

    static BigramLM from_sequences(int vocab, int eos, double smoothing,
                                   const std::vector<std::vector<int>>& sequences);

    int vocab_size() const override { return vocab_; }
    int eos_id() const override { return eos_; }
    int context_limit() const override { return 1 << 28; }

    double count(int prev, int next) const;
    void set_count(int prev, int next, double c);
    void add_count(int prev, int next, double c = 1.0);
    void set_row(int prev, const std::vector<double>& counts);
    double smoothing() const { return smoothing_; }
    const std::vector<double>& counts() const { return counts_; }
    void set_counts(std::vector<double> counts);

    // Closed-form log p(. | prev).
    std::vector<double> row_logprobs(int prev) const;

protected:
    std::vector<double> logprobs_impl(const std::vector<int>& prefix) const override;

private:
    int vocab_;
    int eos_;
    double smoothing_;
    std::vector<double> counts_; // V x V row-major, row = previous token
};

} // namespace detoxlab
