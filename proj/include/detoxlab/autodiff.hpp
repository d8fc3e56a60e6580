// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "detoxlab/tensor.hpp"

namespace detoxlab::ad {

// Reverse-mode autodiff over tensor-valued nodes. Graphs are DAGs built by
// the op functions below; backward() runs in reverse creation order, which is
// a fixed deterministic schedule. A single graph is single-threaded.
class Node;
using Var = std::shared_ptr<Node>;

class Node {
public:
    Tensor value;
    Tensor grad; // empty until backward touches this node
    bool requires_grad = false;
    bool is_leaf = true;
    std::uint64_t id = 0; // creation order
    std::vector<Var> parents;
    std::function<void(Node&)> backprop; // reads this->grad, accumulates into parents

    bool has_grad() const { return grad.numel() != 0; }
    // Gradient with zeros standing in when the node was never reached.
    Tensor grad_or_zero() const { return has_grad() ? grad : Tensor(value.shape(), 0.0); }
};

Var make_param(Tensor value);
Var make_const(Tensor value);

// Elementwise / broadcast arithmetic.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_rowvec(const Var& x, const Var& v); // (T,D) + (D)

// Linear algebra.
Var matmul(const Var& a, const Var& b);   // (m,k) @ (k,n)
Var matmul_t(const Var& a, const Var& b); // (m,k) @ (n,k)^T -> (m,n)

// Row lookup / reshuffling.
Var rows_gather(const Var& table, std::vector<int> ids);       // (V,D) -> (T,D)
Var col_slice(const Var& x, std::size_t start, std::size_t n); // (T,D) -> (T,n)
Var col_concat(const std::vector<Var>& parts);

// Nonlinearities and normalization.
Var gelu(const Var& x);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps);
Var log_softmax_rows(const Var& x);
Var causal_softmax_rows(const Var& scores); // row r attends to cols 0..r

// Reductions.
Var sum(const Var& x);
Var mean(const Var& x);
// Sum of x[t, targets[t]] over rows; targets[t] < 0 skips that row.
Var pick_sum_rows(const Var& x, std::vector<int> targets);

// Runs reverse-mode accumulation from a scalar loss. Throws on non-scalar
// loss and on graph cycles.
void backward(const Var& loss);

// Leaf parameters reachable from `root`, in creation order.
std::vector<Var> reachable_params(const Var& root);

} // namespace detoxlab::ad
