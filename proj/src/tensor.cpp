// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/tensor.hpp"

#include <cmath>

namespace detoxlab {

namespace {

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor: empty shape");
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("tensor: zero dimension in " + shape_str(shape));
        n *= d;
    }
    return n;
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_numel(shape_) != data_.size()) {
        throw std::invalid_argument("tensor: shape " + shape_str(shape_) + " does not match data length " +
                                    std::to_string(data_.size()));
    }
}

double Tensor::item() const {
    if (data_.size() != 1) {
        throw std::invalid_argument("tensor: item() on non-scalar of shape " + shape_str(shape_));
    }
    return data_[0];
}

void Tensor::ensure_finite(const std::string& what) const {
    for (double v : data_) {
        if (!std::isfinite(v)) {
            throw std::runtime_error("non-finite value in " + what);
        }
    }
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    s += ")";
    return s;
}

} // namespace detoxlab
