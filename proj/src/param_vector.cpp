// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/param_vector.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "detoxlab/hashing.hpp"

namespace detoxlab {

void check_same_layout(const ParamVector& a, const ParamVector& b, const std::string& where) {
    if (!a.same_layout(b)) {
        throw std::invalid_argument(where + ": parameter layouts differ");
    }
}

ParamVector& ParamVector::operator+=(const ParamVector& other) {
    check_same_layout(*this, other, "ParamVector::+=");
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
    return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
    check_same_layout(*this, other, "ParamVector::-=");
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= other.values[i];
    return *this;
}

ParamVector& ParamVector::operator*=(double c) {
    for (double& v : values) v *= c;
    return *this;
}

ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
ParamVector operator*(double c, ParamVector a) { return a *= c; }

ParamVector param_delta(const ParamVector& a, const ParamVector& b) {
    check_same_layout(a, b, "param_delta");
    ParamVector out = b;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        const double av = a.values[i];
        const double bv = b.values[i];
        double d = bv - av;
        // a + (b - a) is only correctly rounded, not exact; nudge d by ulps
        // so the arithmetic-compatibility contract a + delta == b holds
        // bit-exactly. Recoverable whenever |delta| is not much larger than
        // |b| (true for fine-tuning deltas; catastrophic-cancellation pairs
        // have no representable fix).
        for (int k = 0; k < 8 && av + d != bv; ++k) {
            d = std::nextafter(d, av + d < bv ? std::numeric_limits<double>::infinity()
                                              : -std::numeric_limits<double>::infinity());
        }
        out.values[i] = d;
    }
    return out;
}

double dot(const ParamVector& a, const ParamVector& b) {
    check_same_layout(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
    return s;
}

double l2_norm(const ParamVector& a) {
    double s = 0.0;
    for (double v : a.values) s += v * v;
    return std::sqrt(s);
}

double cosine_similarity(const ParamVector& a, const ParamVector& b) {
    const double na = l2_norm(a), nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) {
        throw std::invalid_argument("cosine_similarity: zero vector");
    }
    return dot(a, b) / (na * nb);
}

std::uint64_t ParamVector::content_hash() const {
    Fnv1a64 h;
    for (const auto& [name, shape] : layout) {
        h.update(name);
        h.update(shape.data(), shape.size() * sizeof(std::size_t));
    }
    h.update(values);
    return h.value();
}

} // namespace detoxlab
