// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "detoxlab/autodiff.hpp"
#include "detoxlab/rng.hpp"

using namespace detoxlab;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, KeyedRng& rng, double scale = 1.0) {
    Tensor t(std::move(shape), 0.0);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.gaussian();
    return t;
}

double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-6});
    return std::abs(a - b) / denom;
}

// Central-difference check of d(scalar_fn)/d(inputs[i]) for every input
// element against the autodiff gradient.
double max_grad_rel_err(const std::function<ad::Var(const std::vector<ad::Var>&)>& fn,
                        std::vector<Tensor> inputs, double h = 1e-5) {
    std::vector<ad::Var> vars;
    vars.reserve(inputs.size());
    for (const Tensor& t : inputs) vars.push_back(ad::make_param(t));
    ad::Var loss = fn(vars);
    ad::backward(loss);

    double worst = 0.0;
    for (std::size_t vi = 0; vi < inputs.size(); ++vi) {
        for (std::size_t i = 0; i < inputs[vi].numel(); ++i) {
            auto eval = [&](double delta) {
                std::vector<Tensor> probe = inputs;
                probe[vi][i] += delta;
                std::vector<ad::Var> pvars;
                for (const Tensor& t : probe) pvars.push_back(ad::make_const(t));
                return fn(pvars)->value.item();
            };
            const double fd = (eval(h) - eval(-h)) / (2.0 * h);
            const double adg = vars[vi]->grad_or_zero()[i];
            worst = std::max(worst, rel_err(fd, adg));
        }
    }
    return worst;
}

} // namespace

TEST_CASE("sum of squares has analytic gradient 2w") {
    ad::Var w = ad::make_param(Tensor({2}, {1.0, 2.0}));
    ad::Var loss = ad::sum(ad::mul(w, w));
    CHECK(loss->value.item() == doctest::Approx(5.0));
    ad::backward(loss);
    CHECK(w->grad[0] == doctest::Approx(2.0));
    CHECK(w->grad[1] == doctest::Approx(4.0));
}

TEST_CASE("constant loss reaches no parameters") {
    ad::Var c = ad::make_const(Tensor::scalar(3.0));
    ad::Var loss = ad::sum(c);
    ad::backward(loss);
    CHECK(ad::reachable_params(loss).empty());
}

TEST_CASE("backward rejects non-scalar losses") {
    ad::Var w = ad::make_param(Tensor({2}, {1.0, 2.0}));
    CHECK_THROWS_AS(ad::backward(ad::mul(w, w)), std::invalid_argument);
}

TEST_CASE("ops refuse to emit non-finite values") {
    ad::Var big = ad::make_param(Tensor({1}, {1e308}));
    CHECK_THROWS_AS(ad::add(big, big), std::runtime_error);
}

TEST_CASE("unreached parameters report zero gradients") {
    ad::Var used = ad::make_param(Tensor({2}, {1.0, 2.0}));
    ad::Var unused = ad::make_param(Tensor({3}, {1.0, 1.0, 1.0}));
    ad::Var loss = ad::sum(used);
    ad::backward(loss);
    CHECK_FALSE(unused->has_grad());
    const Tensor z = unused->grad_or_zero();
    for (std::size_t i = 0; i < z.numel(); ++i) CHECK(z[i] == 0.0);
}

TEST_CASE("elementwise and matmul gradients match finite differences") {
    KeyedRng rng(7, 1);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor a = random_tensor({3, 4}, rng);
        Tensor b = random_tensor({3, 4}, rng);
        CHECK(max_grad_rel_err([](const std::vector<ad::Var>& v) {
                  return ad::sum(ad::mul(ad::add(v[0], v[1]), ad::sub(v[0], v[1])));
              },
                               {a, b}) < 1e-4);

        Tensor m = random_tensor({3, 4}, rng);
        Tensor n = random_tensor({4, 2}, rng);
        CHECK(max_grad_rel_err([](const std::vector<ad::Var>& v) {
                  return ad::sum(ad::matmul(v[0], v[1]));
              },
                               {m, n}) < 1e-4);

        Tensor p = random_tensor({3, 4}, rng);
        Tensor q = random_tensor({5, 4}, rng);
        CHECK(max_grad_rel_err([](const std::vector<ad::Var>& v) {
                  return ad::sum(ad::mul(ad::matmul_t(v[0], v[1]), ad::matmul_t(v[0], v[1])));
              },
                               {p, q}) < 1e-4);
    }
}

TEST_CASE("nonlinearity and normalization gradients match finite differences") {
    KeyedRng rng(13, 2);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor x = random_tensor({4, 6}, rng);
        CHECK(max_grad_rel_err([](const std::vector<ad::Var>& v) { return ad::sum(ad::gelu(v[0])); }, {x}) <
              1e-4);

        Tensor g = random_tensor({6}, rng, 0.5);
        Tensor b = random_tensor({6}, rng, 0.5);
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += 1.0;
        CHECK(max_grad_rel_err(
                  [](const std::vector<ad::Var>& v) {
                      ad::Var y = ad::layer_norm(v[0], v[1], v[2], 1e-5);
                      return ad::sum(ad::mul(y, y));
                  },
                  {x, g, b}) < 1e-4);

        CHECK(max_grad_rel_err(
                  [](const std::vector<ad::Var>& v) {
                      ad::Var lp = ad::log_softmax_rows(v[0]);
                      return ad::pick_sum_rows(lp, {1, 3, 0, 2});
                  },
                  {x}) < 1e-4);

        Tensor s = random_tensor({5, 5}, rng);
        CHECK(max_grad_rel_err(
                  [](const std::vector<ad::Var>& v) {
                      ad::Var a = ad::causal_softmax_rows(v[0]);
                      return ad::sum(ad::mul(a, a));
                  },
                  {s}) < 1e-4);

        Tensor table = random_tensor({7, 3}, rng);
        CHECK(max_grad_rel_err(
                  [](const std::vector<ad::Var>& v) {
                      ad::Var rows = ad::rows_gather(v[0], {2, 2, 5, 0});
                      return ad::sum(ad::mul(rows, rows));
                  },
                  {table}) < 1e-4);

        Tensor xc = random_tensor({3, 8}, rng);
        CHECK(max_grad_rel_err(
                  [](const std::vector<ad::Var>& v) {
                      ad::Var left = ad::col_slice(v[0], 0, 5);
                      ad::Var right = ad::col_slice(v[0], 5, 3);
                      ad::Var cat = ad::col_concat({right, left});
                      return ad::mean(ad::mul(cat, cat));
                  },
                  {xc}) < 1e-4);
    }
}

TEST_CASE("two-layer net cross-entropy gradient matches central differences") {
    KeyedRng rng(29, 3);
    Tensor x = random_tensor({4, 5}, rng);
    Tensor w1 = random_tensor({5, 6}, rng, 0.5);
    Tensor b1 = random_tensor({6}, rng, 0.1);
    Tensor w2 = random_tensor({6, 3}, rng, 0.5);
    Tensor b2 = random_tensor({3}, rng, 0.1);
    const std::vector<int> labels = {0, 2, 1, 2};

    auto net = [labels, &x](const std::vector<ad::Var>& v) {
        ad::Var xin = ad::make_const(x);
        ad::Var h = ad::gelu(ad::add_rowvec(ad::matmul(xin, v[0]), v[1]));
        ad::Var logits = ad::add_rowvec(ad::matmul(h, v[2]), v[3]);
        ad::Var lp = ad::log_softmax_rows(logits);
        return ad::scale(ad::pick_sum_rows(lp, labels), -1.0);
    };
    CHECK(max_grad_rel_err(net, {w1, b1, w2, b2}, 1e-5) < 1e-4);
}

TEST_CASE("log-softmax rows renormalize to exactly one") {
    KeyedRng rng(31, 4);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = random_tensor({3, 11}, rng, 3.0);
        ad::Var lp = ad::log_softmax_rows(ad::make_const(x));
        for (std::size_t r = 0; r < 3; ++r) {
            double sum = 0.0;
            for (std::size_t c = 0; c < 11; ++c) {
                const double p = std::exp(lp->value.at(r, c));
                CHECK(p > 0.0);
                sum += p;
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("shared subexpressions accumulate gradients") {
    // w appears twice through different paths; gradient must sum both.
    ad::Var w = ad::make_param(Tensor({2}, {3.0, -1.0}));
    ad::Var path1 = ad::scale(w, 2.0);
    ad::Var path2 = ad::mul(w, w);
    ad::Var loss = ad::sum(ad::add(path1, path2));
    ad::backward(loss);
    CHECK(w->grad[0] == doctest::Approx(2.0 + 2.0 * 3.0));
    CHECK(w->grad[1] == doctest::Approx(2.0 + 2.0 * -1.0));
}
