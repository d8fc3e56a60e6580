// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/rng.hpp"

#include <cmath>

namespace detoxlab {

namespace {

// splitmix64 finalizer (Vigna). Full 64-bit avalanche.
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t keyed_bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ (stream + 0x632be59bd9b4e019ULL));
    h = mix64(h ^ (counter + 0x9e3779b97f4a7c15ULL));
    return h;
}

double keyed_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    // 53 high bits -> double in [0, 1)
    return static_cast<double>(keyed_bits(seed, stream, counter) >> 11) * 0x1.0p-53;
}

double KeyedRng::gaussian() {
    // Box-Muller; u1 nudged away from 0 so log() stays finite.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

std::size_t KeyedRng::below(std::size_t n) {
    if (n == 0) return 0;
    // Rejection-free modulo bias is negligible for desk-scale n << 2^64;
    // use 64-bit multiply-shift reduction which is exact and fast.
    unsigned __int128 wide = static_cast<unsigned __int128>(bits()) * n;
    return static_cast<std::size_t>(wide >> 64);
}

} // namespace detoxlab
