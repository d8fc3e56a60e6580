// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace detoxlab {

// FNV-1a 64-bit. Used for artifact provenance fingerprints, not security.
class Fnv1a64 {
public:
    Fnv1a64& update(const void* data, std::size_t len);
    Fnv1a64& update(const std::string& s) { return update(s.data(), s.size()); }
    Fnv1a64& update(const std::vector<double>& xs) {
        return update(xs.data(), xs.size() * sizeof(double));
    }
    std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t fnv1a64(const std::string& s);
std::string hash_hex(std::uint64_t h);

} // namespace detoxlab
