// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "detoxlab/checkpoint.hpp"
#include "detoxlab/rng.hpp"
#include "detoxlab/train.hpp"

namespace detoxlab {

ParamVector task_arithmetic(const ParamVector& base, const ParamVector& tau, double lambda) {
    check_same_layout(base, tau, "task_arithmetic");
    ParamVector out = base;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= lambda * tau.values[i];
    return out;
}

SteerTrainConfig SteerTrainConfig::defaults() {
    SteerTrainConfig cfg;
    cfg.optimizer.kind = OptimizerKind::adamw;
    cfg.optimizer.learning_rate = 1e-2;
    cfg.optimizer.weight_decay = 0.0;
    return cfg;
}

SteeringMatrix train_steer(const TransformerLM& base, const Corpus& toxic_corpus,
                           const SteerTrainConfig& cfg) {
    const std::size_t d = static_cast<std::size_t>(base.config().d_model);
    SteeringMatrix steer;
    steer.w = Tensor({d, d}, 0.0);
    const double init_std = std::sqrt(cfg.init_var);
    KeyedRng rng(cfg.init_seed, /*stream=*/0x57ee);
    for (std::size_t i = 0; i < steer.w.numel(); ++i) steer.w[i] = init_std * rng.gaussian();
    steer.provenance["base"] = param_hash_hex(base.params());
    steer.provenance["train_epsilon"] = std::to_string(cfg.train_epsilon);

    if (cfg.epochs <= 0 || toxic_corpus.empty()) return steer;

    std::vector<std::vector<int>> blocks =
        pack_blocks(toxic_corpus.encode_all(base.tokenizer()), base.config().context, base.eos_id());
    if (blocks.empty()) return steer;

    ParamVector wp;
    wp.layout = {{"steer.w", steer.w.shape()}};
    wp.values = steer.w.vec();
    OptimizerState state;

    std::vector<std::size_t> order(blocks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        KeyedRng shuffle_rng(cfg.init_seed, 0x57ef + static_cast<std::uint64_t>(epoch));
        keyed_shuffle(order, shuffle_rng);
        for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
            std::vector<std::vector<int>> batch;
            const std::size_t hi = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
            for (std::size_t i = at; i < hi; ++i) batch.push_back(blocks[order[i]]);

            // Base weights are constants; only W carries gradient.
            TransformerLM::GraphWeights weights = base.graph_weights(/*trainable=*/false);
            ad::Var w_var = ad::make_param(steer.w);
            ad::Var steered =
                ad::sub(weights.tok_emb, ad::scale(ad::matmul_t(weights.tok_emb, w_var), cfg.train_epsilon));
            ad::Var total;
            for (const auto& block : batch) {
                ad::Var nll = base.block_nll(weights, block, steered);
                total = total ? ad::add(total, nll) : nll;
            }
            ad::Var loss = ad::scale(total, 1.0 / static_cast<double>(batch.size()));
            if (!std::isfinite(loss->value.item())) {
                throw std::runtime_error("train_steer: diverged (non-finite loss)");
            }
            ad::backward(loss);
            ParamVector grads = wp;
            const Tensor g = w_var->grad_or_zero();
            grads.values = g.vec();
            optimizer_step(wp, grads, cfg.optimizer, state);
            steer.w.vec() = wp.values;
        }
    }
    return steer;
}

Tensor steer_embedding_table(const Tensor& embeddings, const Tensor& w, double epsilon) {
    if (w.ndim() != 2 || w.rows() != w.cols() || w.rows() != embeddings.cols()) {
        throw std::invalid_argument("steer_embedding_table: W width must match embedding width");
    }
    const std::size_t v = embeddings.rows(), d = embeddings.cols();
    Tensor out({v, d}, 0.0);
    for (std::size_t r = 0; r < v; ++r) {
        for (std::size_t i = 0; i < d; ++i) {
            double we = 0.0;
            for (std::size_t j = 0; j < d; ++j) we += w.at(i, j) * embeddings.at(r, j);
            out.at(r, i) = embeddings.at(r, i) - epsilon * we;
        }
    }
    return out;
}

SteeredLM::SteeredLM(const TransformerLM& base, const SteeringMatrix& steer, double epsilon) {
    ParamVector pv = base.params();
    TransformerConfig cfg = base.config();
    if (cfg.tied_embeddings) {
        // Untie so the steered table feeds the input while the head keeps the
        // original embeddings.
        cfg.tied_embeddings = false;
        const auto v = static_cast<std::size_t>(cfg.vocab);
        const auto d = static_cast<std::size_t>(cfg.d_model);
        ParamVector untied = pv;
        untied.layout.emplace_back("lm_head", std::vector<std::size_t>{v, d});
        untied.values.insert(untied.values.end(), pv.values.begin(),
                             pv.values.begin() + static_cast<std::ptrdiff_t>(v * d));
        pv = std::move(untied);
    }
    model_ = std::make_unique<TransformerLM>(cfg, base.tokenizer(), pv);

    // Replace the input table with the steered one.
    ParamVector steered = model_->params();
    const auto v = static_cast<std::size_t>(cfg.vocab);
    const auto d = static_cast<std::size_t>(cfg.d_model);
    Tensor table({v, d}, std::vector<double>(steered.values.begin(),
                                             steered.values.begin() + static_cast<std::ptrdiff_t>(v * d)));
    steered_table_ = steer_embedding_table(table, steer.w, epsilon);
    std::copy(steered_table_.vec().begin(), steered_table_.vec().end(), steered.values.begin());
    model_->set_params(steered);
}

const Tensor& SteeredLM::steered_embeddings() const { return steered_table_; }

std::vector<double> SteeredLM::logprobs_impl(const std::vector<int>& prefix) const {
    return model_->next_logprobs(prefix);
}

PrepromptKind preprompt_kind_from_string(const std::string& s) {
    if (s == "short") return PrepromptKind::short_form;
    if (s == "long") return PrepromptKind::long_form;
    if (s == "custom") return PrepromptKind::custom;
    throw std::invalid_argument("unknown preprompt kind: " + s);
}

const std::string& preprompt_text(PrepromptKind kind) {
    static const std::string short_text =
        "Generate text that is respectful, neutral, and safe. Avoid any harmful or biased content.\n";
    static const std::string long_text =
        "You are generating text in a neutral and respectful manner. Ensure that your output is safe and "
        "free from any harmful, unethical, racist, sexist, toxic, dangerous, or illegal content. Avoid "
        "generating text that contains biased, offensive, or harmful language. Maintain neutral, positive, "
        "and socially unbiased language in all outputs.\n";
    static const std::string empty;
    switch (kind) {
    case PrepromptKind::short_form: return short_text;
    case PrepromptKind::long_form: return long_text;
    case PrepromptKind::custom: return empty;
    }
    return empty;
}

std::string apply_preprompt(const std::string& prompt, PrepromptKind kind, const std::string& custom_text) {
    if (kind == PrepromptKind::custom) return custom_text + prompt;
    return preprompt_text(kind) + prompt;
}

} // namespace detoxlab
