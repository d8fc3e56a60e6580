// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace detoxlab::ad {

namespace {

std::atomic<std::uint64_t> next_id{1};

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop,
              const char* opname) {
    value.ensure_finite(opname);
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->id = next_id.fetch_add(1);
    n->is_leaf = false;
    for (const auto& p : parents) {
        if (p->requires_grad) n->requires_grad = true;
    }
    n->parents = std::move(parents);
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

Tensor& grad_buf(Node& n) {
    if (!n.has_grad()) n.grad = Tensor(n.value.shape(), 0.0);
    return n.grad;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->value.same_shape(b->value)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a->value.shape()) +
                                    " vs " + shape_str(b->value.shape()));
    }
}

} // namespace

Var make_param(Tensor value) {
    value.ensure_finite("param");
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->id = next_id.fetch_add(1);
    return n;
}

Var make_const(Tensor value) {
    value.ensure_finite("const");
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = false;
    n->id = next_id.fetch_add(1);
    return n;
}

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
    return make_node(std::move(out), {a, b},
                     [](Node& n) {
                         Tensor& da = grad_buf(*n.parents[0]);
                         Tensor& db = grad_buf(*n.parents[1]);
                         for (std::size_t i = 0; i < n.grad.numel(); ++i) {
                             da[i] += n.grad[i];
                             db[i] += n.grad[i];
                         }
                     },
                     "add");
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
    return make_node(std::move(out), {a, b},
                     [](Node& n) {
                         Tensor& da = grad_buf(*n.parents[0]);
                         Tensor& db = grad_buf(*n.parents[1]);
                         for (std::size_t i = 0; i < n.grad.numel(); ++i) {
                             da[i] += n.grad[i];
                             db[i] -= n.grad[i];
                         }
                     },
                     "sub");
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
    return make_node(std::move(out), {a, b},
                     [](Node& n) {
                         Tensor& da = grad_buf(*n.parents[0]);
                         Tensor& db = grad_buf(*n.parents[1]);
                         const Tensor& av = n.parents[0]->value;
                         const Tensor& bv = n.parents[1]->value;
                         for (std::size_t i = 0; i < n.grad.numel(); ++i) {
                             da[i] += n.grad[i] * bv[i];
                             db[i] += n.grad[i] * av[i];
                         }
                     },
                     "mul");
}

Var scale(const Var& a, double c) {
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c;
    return make_node(std::move(out), {a},
                     [c](Node& n) {
                         Tensor& da = grad_buf(*n.parents[0]);
                         for (std::size_t i = 0; i < n.grad.numel(); ++i) da[i] += c * n.grad[i];
                     },
                     "scale");
}

Var add_rowvec(const Var& x, const Var& v) {
    if (x->value.ndim() != 2 || v->value.numel() != x->value.cols()) {
        throw std::invalid_argument("add_rowvec: need (T,D) + (D)");
    }
    Tensor out = x->value;
    const std::size_t rows = out.rows(), cols = out.cols();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += v->value[c];
    return make_node(std::move(out), {x, v},
                     [](Node& n) {
                         Tensor& dx = grad_buf(*n.parents[0]);
                         Tensor& dv = grad_buf(*n.parents[1]);
                         const std::size_t rows = n.grad.rows(), cols = n.grad.cols();
                         for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t c = 0; c < cols; ++c) {
                                 dx.at(r, c) += n.grad.at(r, c);
                                 dv[c] += n.grad.at(r, c);
                             }
                     },
                     "add_rowvec");
}

namespace {

// out(m,n) = A(m,k) @ B(k,n); accumulates (does not clear dst).
void gemm_acc(const Tensor& a, const Tensor& b, Tensor& dst, bool transpose_a, bool transpose_b) {
    const std::size_t m = transpose_a ? a.cols() : a.rows();
    const std::size_t k = transpose_a ? a.rows() : a.cols();
    const std::size_t n = transpose_b ? b.rows() : b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = transpose_a ? a.at(p, i) : a.at(i, p);
            if (av == 0.0) continue;
            const double* brow = transpose_b ? nullptr : &b.data()[p * n];
            double* drow = &dst.data()[i * n];
            if (!transpose_b) {
                for (std::size_t j = 0; j < n; ++j) drow[j] += av * brow[j];
            } else {
                for (std::size_t j = 0; j < n; ++j) drow[j] += av * b.at(j, p);
            }
        }
    }
}

} // namespace

Var matmul(const Var& a, const Var& b) {
    if (a->value.ndim() != 2 || b->value.ndim() != 2 || a->value.cols() != b->value.rows()) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a->value.shape()) + " @ " +
                                    shape_str(b->value.shape()));
    }
    Tensor out({a->value.rows(), b->value.cols()}, 0.0);
    gemm_acc(a->value, b->value, out, false, false);
    return make_node(std::move(out), {a, b},
                     [](Node& n) {
                         // dA = dC @ B^T ; dB = A^T @ dC
                         gemm_acc(n.grad, n.parents[1]->value, grad_buf(*n.parents[0]), false, true);
                         gemm_acc(n.parents[0]->value, n.grad, grad_buf(*n.parents[1]), true, false);
                     },
                     "matmul");
}

Var matmul_t(const Var& a, const Var& b) {
    if (a->value.ndim() != 2 || b->value.ndim() != 2 || a->value.cols() != b->value.cols()) {
        throw std::invalid_argument("matmul_t: incompatible shapes " + shape_str(a->value.shape()) + " @ " +
                                    shape_str(b->value.shape()) + "^T");
    }
    Tensor out({a->value.rows(), b->value.rows()}, 0.0);
    gemm_acc(a->value, b->value, out, false, true);
    return make_node(std::move(out), {a, b},
                     [](Node& n) {
                         // C = A B^T : dA = dC @ B ; dB = dC^T @ A
                         gemm_acc(n.grad, n.parents[1]->value, grad_buf(*n.parents[0]), false, false);
                         gemm_acc(n.grad, n.parents[0]->value, grad_buf(*n.parents[1]), true, false);
                     },
                     "matmul_t");
}

Var rows_gather(const Var& table, std::vector<int> ids) {
    const Tensor& tv = table->value;
    if (tv.ndim() != 2) throw std::invalid_argument("rows_gather: table must be 2-D");
    const std::size_t d = tv.cols();
    Tensor out({ids.size(), d}, 0.0);
    for (std::size_t t = 0; t < ids.size(); ++t) {
        int id = ids[t];
        if (id < 0 || static_cast<std::size_t>(id) >= tv.rows()) {
            throw std::out_of_range("rows_gather: id " + std::to_string(id) + " out of range");
        }
        for (std::size_t c = 0; c < d; ++c) out.at(t, c) = tv.at(static_cast<std::size_t>(id), c);
    }
    return make_node(std::move(out), {table},
                     [ids = std::move(ids)](Node& n) {
                         Tensor& dt = grad_buf(*n.parents[0]);
                         const std::size_t d = n.grad.cols();
                         for (std::size_t t = 0; t < ids.size(); ++t)
                             for (std::size_t c = 0; c < d; ++c)
                                 dt.at(static_cast<std::size_t>(ids[t]), c) += n.grad.at(t, c);
                     },
                     "rows_gather");
}

Var col_slice(const Var& x, std::size_t start, std::size_t n) {
    const Tensor& xv = x->value;
    if (xv.ndim() != 2 || start + n > xv.cols()) throw std::invalid_argument("col_slice: out of range");
    Tensor out({xv.rows(), n}, 0.0);
    for (std::size_t r = 0; r < xv.rows(); ++r)
        for (std::size_t c = 0; c < n; ++c) out.at(r, c) = xv.at(r, start + c);
    return make_node(std::move(out), {x},
                     [start](Node& nd) {
                         Tensor& dx = grad_buf(*nd.parents[0]);
                         for (std::size_t r = 0; r < nd.grad.rows(); ++r)
                             for (std::size_t c = 0; c < nd.grad.cols(); ++c)
                                 dx.at(r, start + c) += nd.grad.at(r, c);
                     },
                     "col_slice");
}

Var col_concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("col_concat: no parts");
    const std::size_t rows = parts[0]->value.rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p->value.ndim() != 2 || p->value.rows() != rows) {
            throw std::invalid_argument("col_concat: row mismatch");
        }
        total += p->value.cols();
    }
    Tensor out({rows, total}, 0.0);
    std::size_t off = 0;
    for (const auto& p : parts) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < p->value.cols(); ++c) out.at(r, off + c) = p->value.at(r, c);
        off += p->value.cols();
    }
    return make_node(std::move(out), parts,
                     [](Node& n) {
                         std::size_t off = 0;
                         for (auto& p : n.parents) {
                             Tensor& dp = grad_buf(*p);
                             for (std::size_t r = 0; r < n.grad.rows(); ++r)
                                 for (std::size_t c = 0; c < dp.cols(); ++c)
                                     dp.at(r, c) += n.grad.at(r, off + c);
                             off += dp.cols();
                         }
                     },
                     "col_concat");
}

Var gelu(const Var& x) {
    const double inv_sqrt2 = 0.70710678118654752440;
    Tensor out = x->value;
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double v = out[i];
        out[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
    }
    return make_node(std::move(out), {x},
                     [inv_sqrt2](Node& n) {
                         const double inv_sqrt2pi = 0.39894228040143267794;
                         Tensor& dx = grad_buf(*n.parents[0]);
                         const Tensor& xv = n.parents[0]->value;
                         for (std::size_t i = 0; i < n.grad.numel(); ++i) {
                             const double v = xv[i];
                             const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
                             const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
                             dx[i] += n.grad[i] * (cdf + v * pdf);
                         }
                     },
                     "gelu");
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
    const Tensor& xv = x->value;
    if (xv.ndim() != 2 || gain->value.numel() != xv.cols() || bias->value.numel() != xv.cols()) {
        throw std::invalid_argument("layer_norm: shapes");
    }
    const std::size_t rows = xv.rows(), cols = xv.cols();
    Tensor out({rows, cols}, 0.0);
    Tensor xhat({rows, cols}, 0.0);
    std::vector<double> inv_sigma(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double mu = 0.0;
        for (std::size_t c = 0; c < cols; ++c) mu += xv.at(r, c);
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double d = xv.at(r, c) - mu;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        inv_sigma[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < cols; ++c) {
            const double h = (xv.at(r, c) - mu) * inv_sigma[r];
            xhat.at(r, c) = h;
            out.at(r, c) = gain->value[c] * h + bias->value[c];
        }
    }
    return make_node(std::move(out), {x, gain, bias},
                     [xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](Node& n) {
                         Tensor& dx = grad_buf(*n.parents[0]);
                         Tensor& dg = grad_buf(*n.parents[1]);
                         Tensor& db = grad_buf(*n.parents[2]);
                         const Tensor& g = n.parents[1]->value;
                         const std::size_t rows = n.grad.rows(), cols = n.grad.cols();
                         for (std::size_t r = 0; r < rows; ++r) {
                             double mean_w = 0.0, mean_wx = 0.0;
                             for (std::size_t c = 0; c < cols; ++c) {
                                 const double w = n.grad.at(r, c) * g[c];
                                 mean_w += w;
                                 mean_wx += w * xhat.at(r, c);
                             }
                             mean_w /= static_cast<double>(cols);
                             mean_wx /= static_cast<double>(cols);
                             for (std::size_t c = 0; c < cols; ++c) {
                                 const double w = n.grad.at(r, c) * g[c];
                                 dx.at(r, c) += (w - mean_w - xhat.at(r, c) * mean_wx) * inv_sigma[r];
                                 dg[c] += n.grad.at(r, c) * xhat.at(r, c);
                                 db[c] += n.grad.at(r, c);
                             }
                         }
                     },
                     "layer_norm");
}

Var log_softmax_rows(const Var& x) {
    const Tensor& xv = x->value;
    if (xv.ndim() != 2) throw std::invalid_argument("log_softmax_rows: need 2-D");
    const std::size_t rows = xv.rows(), cols = xv.cols();
    Tensor out({rows, cols}, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double mx = xv.at(r, 0);
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, xv.at(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) z += std::exp(xv.at(r, c) - mx);
        const double lz = mx + std::log(z);
        for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = xv.at(r, c) - lz;
    }
    return make_node(std::move(out), {x},
                     [](Node& n) {
                         Tensor& dx = grad_buf(*n.parents[0]);
                         const std::size_t rows = n.grad.rows(), cols = n.grad.cols();
                         for (std::size_t r = 0; r < rows; ++r) {
                             double gsum = 0.0;
                             for (std::size_t c = 0; c < cols; ++c) gsum += n.grad.at(r, c);
                             for (std::size_t c = 0; c < cols; ++c) {
                                 const double p = std::exp(n.value.at(r, c));
                                 dx.at(r, c) += n.grad.at(r, c) - p * gsum;
                             }
                         }
                     },
                     "log_softmax_rows");
}

Var causal_softmax_rows(const Var& scores) {
    const Tensor& sv = scores->value;
    if (sv.ndim() != 2 || sv.rows() != sv.cols()) {
        throw std::invalid_argument("causal_softmax_rows: need square (T,T)");
    }
    const std::size_t t = sv.rows();
    Tensor out({t, t}, 0.0);
    for (std::size_t r = 0; r < t; ++r) {
        double mx = sv.at(r, 0);
        for (std::size_t c = 1; c <= r; ++c) mx = std::max(mx, sv.at(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c <= r; ++c) z += std::exp(sv.at(r, c) - mx);
        for (std::size_t c = 0; c <= r; ++c) out.at(r, c) = std::exp(sv.at(r, c) - mx) / z;
    }
    return make_node(std::move(out), {scores},
                     [](Node& n) {
                         Tensor& ds = grad_buf(*n.parents[0]);
                         const std::size_t t = n.grad.rows();
                         for (std::size_t r = 0; r < t; ++r) {
                             double dot = 0.0;
                             for (std::size_t c = 0; c <= r; ++c) dot += n.grad.at(r, c) * n.value.at(r, c);
                             for (std::size_t c = 0; c <= r; ++c)
                                 ds.at(r, c) += n.value.at(r, c) * (n.grad.at(r, c) - dot);
                         }
                     },
                     "causal_softmax_rows");
}

Var sum(const Var& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x->value.numel(); ++i) s += x->value[i];
    return make_node(Tensor::scalar(s), {x},
                     [](Node& n) {
                         Tensor& dx = grad_buf(*n.parents[0]);
                         for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += n.grad[0];
                     },
                     "sum");
}

Var mean(const Var& x) {
    const double inv_n = 1.0 / static_cast<double>(x->value.numel());
    double s = 0.0;
    for (std::size_t i = 0; i < x->value.numel(); ++i) s += x->value[i];
    return make_node(Tensor::scalar(s * inv_n), {x},
                     [inv_n](Node& n) {
                         Tensor& dx = grad_buf(*n.parents[0]);
                         for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += n.grad[0] * inv_n;
                     },
                     "mean");
}

Var pick_sum_rows(const Var& x, std::vector<int> targets) {
    const Tensor& xv = x->value;
    if (xv.ndim() != 2 || targets.size() != xv.rows()) {
        throw std::invalid_argument("pick_sum_rows: need one target per row");
    }
    double s = 0.0;
    for (std::size_t r = 0; r < targets.size(); ++r) {
        if (targets[r] < 0) continue;
        if (static_cast<std::size_t>(targets[r]) >= xv.cols()) {
            throw std::out_of_range("pick_sum_rows: target out of range");
        }
        s += xv.at(r, static_cast<std::size_t>(targets[r]));
    }
    return make_node(Tensor::scalar(s), {x},
                     [targets = std::move(targets)](Node& n) {
                         Tensor& dx = grad_buf(*n.parents[0]);
                         for (std::size_t r = 0; r < targets.size(); ++r) {
                             if (targets[r] < 0) continue;
                             dx.at(r, static_cast<std::size_t>(targets[r])) += n.grad[0];
                         }
                     },
                     "pick_sum_rows");
}

void backward(const Var& loss) {
    if (!loss) throw std::invalid_argument("backward: null loss");
    if (!loss->value.is_scalar()) {
        throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss->value.shape()));
    }
    // Iterative post-order DFS; 1 = on stack (cycle sentinel), 2 = done.
    std::unordered_map<Node*, int> state;
    std::vector<Node*> order;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    state[loss.get()] = 1;
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx].get();
            ++idx;
            auto it = state.find(p);
            if (it == state.end()) {
                state[p] = 1;
                stack.emplace_back(p, 0);
            } else if (it->second == 1) {
                throw std::runtime_error("backward: cycle detected in autodiff graph");
            }
        } else {
            state[node] = 2;
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss->grad = Tensor::scalar(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->requires_grad && n->backprop && n->has_grad()) n->backprop(*n);
    }
}

std::vector<Var> reachable_params(const Var& root) {
    std::vector<Var> out;
    std::unordered_set<Node*> seen;
    std::vector<Var> stack{root};
    while (!stack.empty()) {
        Var n = stack.back();
        stack.pop_back();
        if (!seen.insert(n.get()).second) continue;
        if (n->is_leaf && n->requires_grad) out.push_back(n);
        for (const auto& p : n->parents) stack.push_back(p);
    }
    std::sort(out.begin(), out.end(), [](const Var& a, const Var& b) { return a->id < b->id; });
    return out;
}

} // namespace detoxlab::ad
