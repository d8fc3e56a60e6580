// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

namespace detoxlab {

// Counter-based splittable RNG. Every draw is a pure function of
// (seed, stream, counter), so parallel generation is reproducible no matter
// how work is scheduled.
std::uint64_t keyed_bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

// Uniform in [0, 1).
double keyed_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

// Stateful convenience wrapper around the keyed generator: fixes (seed, stream)
// and advances an internal counter.
class KeyedRng {
public:
    KeyedRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    double uniform() { return keyed_uniform(seed_, stream_, counter_++); }
    std::uint64_t bits() { return keyed_bits(seed_, stream_, counter_++); }

    // Standard normal via Box-Muller (consumes two counters).
    double gaussian();

    // Uniform integer in [0, n).
    std::size_t below(std::size_t n);

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

// Deterministic in-place Fisher-Yates shuffle.
template <typename T>
void keyed_shuffle(std::vector<T>& xs, KeyedRng& rng) {
    if (xs.size() < 2) return;
    for (std::size_t i = xs.size() - 1; i > 0; --i) {
        std::size_t j = rng.below(i + 1);
        std::swap(xs[i], xs[j]);
    }
}

} // namespace detoxlab
