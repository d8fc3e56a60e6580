// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/loglinear.hpp"

#include <cmath>
#include <stdexcept>

#include "detoxlab/rng.hpp"

namespace detoxlab {

LogLinearLM::LogLinearLM(Tokenizer tok, std::uint64_t init_seed, double init_std)
    : tok_(std::move(tok)) {
    const std::size_t v = static_cast<std::size_t>(tok_.vocab_size());
    table_ = Tensor({v, v}, 0.0);
    KeyedRng rng(init_seed, /*stream=*/0x10f1);
    for (std::size_t i = 0; i < table_.numel(); ++i) table_[i] = init_std * rng.gaussian();
}

LogLinearLM::LogLinearLM(Tokenizer tok, Tensor table) : tok_(std::move(tok)), table_(std::move(table)) {
    if (table_.ndim() != 2 || table_.rows() != table_.cols() ||
        table_.rows() != static_cast<std::size_t>(tok_.vocab_size())) {
        throw std::invalid_argument("loglinear: table must be (V,V) matching tokenizer vocab");
    }
}

ParamVector LogLinearLM::params() const {
    ParamVector pv;
    pv.layout = {{"table", table_.shape()}};
    pv.values = table_.vec();
    return pv;
}

void LogLinearLM::set_params(const ParamVector& pv) {
    check_same_layout(pv, params(), "LogLinearLM::set_params");
    table_.vec() = pv.values;
}

std::vector<double> LogLinearLM::logprobs_impl(const std::vector<int>& prefix) const {
    const int prev = prefix.empty() ? eos_id() : prefix.back();
    const std::size_t v = table_.rows();
    std::vector<double> out(v);
    double mx = table_.at(static_cast<std::size_t>(prev), 0);
    for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, table_.at(static_cast<std::size_t>(prev), j));
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) z += std::exp(table_.at(static_cast<std::size_t>(prev), j) - mx);
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < v; ++j) out[j] = table_.at(static_cast<std::size_t>(prev), j) - lz;
    return out;
}

TrainableLM::LossGraph LogLinearLM::loss_graph(const std::vector<std::vector<int>>& blocks) const {
    if (blocks.empty()) throw std::invalid_argument("loss_graph: no blocks");
    LossGraph g;
    ad::Var table = ad::make_param(table_);
    g.param_vars = {table};
    ad::Var total;
    for (const auto& block : blocks) {
        if (block.size() < 2) throw std::invalid_argument("loss_graph: block shorter than 2 tokens");
        std::vector<int> ctx(block.begin(), block.end() - 1);
        std::vector<int> targets(block.begin() + 1, block.end());
        ad::Var rows = ad::rows_gather(table, ctx);
        ad::Var lp = ad::log_softmax_rows(rows);
        ad::Var ll = ad::pick_sum_rows(lp, targets);
        ad::Var nll = ad::scale(ll, -1.0);
        total = total ? ad::add(total, nll) : nll;
        g.predicted_tokens += targets.size();
    }
    g.loss = ad::scale(total, 1.0 / static_cast<double>(blocks.size()));
    return g;
}

} // namespace detoxlab
