// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace detoxlab {

// Flat, ordered view of all model parameters. Two vectors are
// arithmetic-compatible iff their layouts are identical; all arithmetic is
// elementwise and exact.
struct ParamVector {
    using Layout = std::vector<std::pair<std::string, std::vector<std::size_t>>>;

    Layout layout;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    bool same_layout(const ParamVector& other) const { return layout == other.layout; }

    ParamVector& operator+=(const ParamVector& other);
    ParamVector& operator-=(const ParamVector& other);
    ParamVector& operator*=(double c);

    // Fingerprint over layout and raw value bytes.
    std::uint64_t content_hash() const;
};

ParamVector operator+(ParamVector a, const ParamVector& b);
ParamVector operator-(ParamVector a, const ParamVector& b);
ParamVector operator*(double c, ParamVector a);

// b - a; tau_toxic = param_delta(theta_base, theta_toxic).
ParamVector param_delta(const ParamVector& a, const ParamVector& b);

double dot(const ParamVector& a, const ParamVector& b);
double l2_norm(const ParamVector& a);
double cosine_similarity(const ParamVector& a, const ParamVector& b);

void check_same_layout(const ParamVector& a, const ParamVector& b, const std::string& where);

} // namespace detoxlab
