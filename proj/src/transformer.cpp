// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/transformer.hpp"

#include <cmath>
#include <stdexcept>

#include "detoxlab/rng.hpp"

namespace detoxlab {

void TransformerConfig::validate() const {
    if (vocab < 2) throw std::invalid_argument("transformer: vocab must be >= 2");
    if (context < 2) throw std::invalid_argument("transformer: context must be >= 2");
    if (layers < 1 || heads < 1 || d_model < 1) throw std::invalid_argument("transformer: bad dims");
    if (d_model % heads != 0) throw std::invalid_argument("transformer: d_model must divide by heads");
    if (!(init_std > 0.0)) throw std::invalid_argument("transformer: init_std must be positive");
}

TransformerLM::TransformerLM(TransformerConfig cfg, Tokenizer tok, std::uint64_t init_seed)
    : cfg_(cfg), tok_(std::move(tok)) {
    cfg_.validate();
    if (tok_.vocab_size() != cfg_.vocab) {
        throw std::invalid_argument("transformer: tokenizer vocab does not match config");
    }
    const auto v = static_cast<std::size_t>(cfg_.vocab);
    const auto l = static_cast<std::size_t>(cfg_.context);
    const auto d = static_cast<std::size_t>(cfg_.d_model);
    const std::size_t h = 4 * d;

    KeyedRng rng(init_seed, /*stream=*/0x7f0d);
    auto gauss = [&](std::vector<std::size_t> shape) {
        Tensor t(std::move(shape), 0.0);
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] = cfg_.init_std * rng.gaussian();
        return t;
    };

    tok_emb_ = gauss({v, d});
    pos_emb_ = gauss({l, d});
    layers_.resize(static_cast<std::size_t>(cfg_.layers));
    for (auto& lw : layers_) {
        lw.ln1_g = Tensor({d}, 1.0);
        lw.ln1_b = Tensor({d}, 0.0);
        lw.wqkv = gauss({d, 3 * d});
        lw.bqkv = Tensor({3 * d}, 0.0);
        lw.wo = gauss({d, d});
        lw.bo = Tensor({d}, 0.0);
        lw.ln2_g = Tensor({d}, 1.0);
        lw.ln2_b = Tensor({d}, 0.0);
        lw.wfc = gauss({d, h});
        lw.bfc = Tensor({h}, 0.0);
        lw.wproj = gauss({h, d});
        lw.bproj = Tensor({d}, 0.0);
    }
    lnf_g_ = Tensor({d}, 1.0);
    lnf_b_ = Tensor({d}, 0.0);
    if (!cfg_.tied_embeddings) lm_head_ = gauss({v, d});
}

TransformerLM::TransformerLM(TransformerConfig cfg, Tokenizer tok, const ParamVector& pv)
    : TransformerLM(cfg, std::move(tok), /*init_seed=*/0) {
    set_params(pv);
}

ParamVector::Layout TransformerLM::layout() const {
    const auto v = static_cast<std::size_t>(cfg_.vocab);
    const auto l = static_cast<std::size_t>(cfg_.context);
    const auto d = static_cast<std::size_t>(cfg_.d_model);
    const std::size_t h = 4 * d;
    ParamVector::Layout out;
    out.emplace_back("tok_emb", std::vector<std::size_t>{v, d});
    out.emplace_back("pos_emb", std::vector<std::size_t>{l, d});
    for (int i = 0; i < cfg_.layers; ++i) {
        const std::string p = "layers." + std::to_string(i) + ".";
        out.emplace_back(p + "ln1.gain", std::vector<std::size_t>{d});
        out.emplace_back(p + "ln1.bias", std::vector<std::size_t>{d});
        out.emplace_back(p + "attn.wqkv", std::vector<std::size_t>{d, 3 * d});
        out.emplace_back(p + "attn.bqkv", std::vector<std::size_t>{3 * d});
        out.emplace_back(p + "attn.wo", std::vector<std::size_t>{d, d});
        out.emplace_back(p + "attn.bo", std::vector<std::size_t>{d});
        out.emplace_back(p + "ln2.gain", std::vector<std::size_t>{d});
        out.emplace_back(p + "ln2.bias", std::vector<std::size_t>{d});
        out.emplace_back(p + "mlp.wfc", std::vector<std::size_t>{d, h});
        out.emplace_back(p + "mlp.bfc", std::vector<std::size_t>{h});
        out.emplace_back(p + "mlp.wproj", std::vector<std::size_t>{h, d});
        out.emplace_back(p + "mlp.bproj", std::vector<std::size_t>{d});
    }
    out.emplace_back("lnf.gain", std::vector<std::size_t>{d});
    out.emplace_back("lnf.bias", std::vector<std::size_t>{d});
    if (!cfg_.tied_embeddings) out.emplace_back("lm_head", std::vector<std::size_t>{v, d});
    return out;
}

namespace {

void append(std::vector<double>& values, const Tensor& t) {
    values.insert(values.end(), t.vec().begin(), t.vec().end());
}

void take(const std::vector<double>& values, std::size_t& off, Tensor& t) {
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(off),
              values.begin() + static_cast<std::ptrdiff_t>(off + t.numel()), t.vec().begin());
    off += t.numel();
}

} // namespace

ParamVector TransformerLM::params() const {
    ParamVector pv;
    pv.layout = layout();
    append(pv.values, tok_emb_);
    append(pv.values, pos_emb_);
    for (const auto& lw : layers_) {
        append(pv.values, lw.ln1_g);
        append(pv.values, lw.ln1_b);
        append(pv.values, lw.wqkv);
        append(pv.values, lw.bqkv);
        append(pv.values, lw.wo);
        append(pv.values, lw.bo);
        append(pv.values, lw.ln2_g);
        append(pv.values, lw.ln2_b);
        append(pv.values, lw.wfc);
        append(pv.values, lw.bfc);
        append(pv.values, lw.wproj);
        append(pv.values, lw.bproj);
    }
    append(pv.values, lnf_g_);
    append(pv.values, lnf_b_);
    if (!cfg_.tied_embeddings) append(pv.values, lm_head_);
    return pv;
}

void TransformerLM::set_params(const ParamVector& pv) {
    ParamVector current;
    current.layout = layout();
    if (pv.layout != current.layout) {
        throw std::invalid_argument("transformer: parameter layout mismatch");
    }
    std::size_t off = 0;
    take(pv.values, off, tok_emb_);
    take(pv.values, off, pos_emb_);
    for (auto& lw : layers_) {
        take(pv.values, off, lw.ln1_g);
        take(pv.values, off, lw.ln1_b);
        take(pv.values, off, lw.wqkv);
        take(pv.values, off, lw.bqkv);
        take(pv.values, off, lw.wo);
        take(pv.values, off, lw.bo);
        take(pv.values, off, lw.ln2_g);
        take(pv.values, off, lw.ln2_b);
        take(pv.values, off, lw.wfc);
        take(pv.values, off, lw.bfc);
        take(pv.values, off, lw.wproj);
        take(pv.values, off, lw.bproj);
    }
    take(pv.values, off, lnf_g_);
    take(pv.values, off, lnf_b_);
    if (!cfg_.tied_embeddings) take(pv.values, off, lm_head_);
    if (off != pv.values.size()) throw std::invalid_argument("transformer: parameter size mismatch");
}

// ---------------------------------------------------------------------------
// Graph-free inference path.
// ---------------------------------------------------------------------------

namespace {

// dst(m,n) += a(m,k) @ b(k,n), optionally with b transposed ((n,k) input).
void gemm(const Tensor& a, const Tensor& b, Tensor& dst, bool transpose_b) {
    const std::size_t m = a.rows(), k = a.cols();
    const std::size_t n = transpose_b ? b.rows() : b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        double* drow = &dst.data()[i * n];
        if (!transpose_b) {
            for (std::size_t p = 0; p < k; ++p) {
                const double av = a.at(i, p);
                const double* brow = &b.data()[p * n];
                for (std::size_t j = 0; j < n; ++j) drow[j] += av * brow[j];
            }
        } else {
            for (std::size_t j = 0; j < n; ++j) {
                const double* brow = &b.data()[j * k];
                double s = 0.0;
                for (std::size_t p = 0; p < k; ++p) s += a.at(i, p) * brow[p];
                drow[j] += s;
            }
        }
    }
}

void layer_norm_rows(const Tensor& x, const Tensor& g, const Tensor& b, double eps, Tensor& out) {
    const std::size_t rows = x.rows(), cols = x.cols();
    for (std::size_t r = 0; r < rows; ++r) {
        double mu = 0.0;
        for (std::size_t c = 0; c < cols; ++c) mu += x.at(r, c);
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double dv = x.at(r, c) - mu;
            var += dv * dv;
        }
        var /= static_cast<double>(cols);
        const double inv_sigma = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < cols; ++c) {
            out.at(r, c) = g[c] * ((x.at(r, c) - mu) * inv_sigma) + b[c];
        }
    }
}

} // namespace

Tensor TransformerLM::forward_hidden(const std::vector<int>& tokens) const {
    const std::size_t t = tokens.size();
    if (t == 0) throw std::invalid_argument("transformer: empty token block");
    if (t > static_cast<std::size_t>(cfg_.context)) {
        throw std::invalid_argument("transformer: block exceeds context length");
    }
    const std::size_t d = static_cast<std::size_t>(cfg_.d_model);
    const std::size_t hd = d / static_cast<std::size_t>(cfg_.heads);
    const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));

    Tensor x({t, d}, 0.0);
    for (std::size_t r = 0; r < t; ++r) {
        const int id = tokens[r];
        if (id < 0 || id >= cfg_.vocab) throw std::out_of_range("transformer: token id out of range");
        for (std::size_t c = 0; c < d; ++c) {
            x.at(r, c) = tok_emb_.at(static_cast<std::size_t>(id), c) + pos_emb_.at(r, c);
        }
    }

    Tensor normed({t, d}, 0.0);
    for (const auto& lw : layers_) {
        // Attention block.
        layer_norm_rows(x, lw.ln1_g, lw.ln1_b, cfg_.ln_eps, normed);
        Tensor qkv({t, 3 * d}, 0.0);
        for (std::size_t r = 0; r < t; ++r)
            for (std::size_t c = 0; c < 3 * d; ++c) qkv.at(r, c) = lw.bqkv[c];
        gemm(normed, lw.wqkv, qkv, false);

        Tensor attn_out({t, d}, 0.0);
        std::vector<double> scores(t);
        for (int head = 0; head < cfg_.heads; ++head) {
            const std::size_t qo = static_cast<std::size_t>(head) * hd;
            const std::size_t ko = d + qo;
            const std::size_t vo = 2 * d + qo;
            for (std::size_t r = 0; r < t; ++r) {
                double mx = -1e300;
                for (std::size_t c2 = 0; c2 <= r; ++c2) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < hd; ++k) s += qkv.at(r, qo + k) * qkv.at(c2, ko + k);
                    scores[c2] = s * inv_sqrt_hd;
                    mx = std::max(mx, scores[c2]);
                }
                double z = 0.0;
                for (std::size_t c2 = 0; c2 <= r; ++c2) {
                    scores[c2] = std::exp(scores[c2] - mx);
                    z += scores[c2];
                }
                for (std::size_t c2 = 0; c2 <= r; ++c2) {
                    const double w = scores[c2] / z;
                    for (std::size_t k = 0; k < hd; ++k) attn_out.at(r, qo + k) += w * qkv.at(c2, vo + k);
                }
            }
        }
        Tensor proj({t, d}, 0.0);
        for (std::size_t r = 0; r < t; ++r)
            for (std::size_t c = 0; c < d; ++c) proj.at(r, c) = lw.bo[c];
        gemm(attn_out, lw.wo, proj, false);
        for (std::size_t i = 0; i < x.numel(); ++i) x[i] += proj[i];

        // MLP block.
        layer_norm_rows(x, lw.ln2_g, lw.ln2_b, cfg_.ln_eps, normed);
        Tensor hidden({t, 4 * d}, 0.0);
        for (std::size_t r = 0; r < t; ++r)
            for (std::size_t c = 0; c < 4 * d; ++c) hidden.at(r, c) = lw.bfc[c];
        gemm(normed, lw.wfc, hidden, false);
        const double inv_sqrt2 = 0.70710678118654752440;
        for (std::size_t i = 0; i < hidden.numel(); ++i) {
            const double v = hidden[i];
            hidden[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
        }
        Tensor mlp({t, d}, 0.0);
        for (std::size_t r = 0; r < t; ++r)
            for (std::size_t c = 0; c < d; ++c) mlp.at(r, c) = lw.bproj[c];
        gemm(hidden, lw.wproj, mlp, false);
        for (std::size_t i = 0; i < x.numel(); ++i) x[i] += mlp[i];
    }

    Tensor out({t, d}, 0.0);
    layer_norm_rows(x, lnf_g_, lnf_b_, cfg_.ln_eps, out);
    return out;
}

Tensor TransformerLM::forward_logits(const std::vector<int>& tokens) const {
    Tensor hidden = forward_hidden(tokens);
    const Tensor& head = cfg_.tied_embeddings ? tok_emb_ : lm_head_;
    Tensor logits({hidden.rows(), head.rows()}, 0.0);
    gemm(hidden, head, logits, true);
    logits.ensure_finite("transformer logits");
    return logits;
}

std::vector<double> TransformerLM::logprobs_impl(const std::vector<int>& prefix) const {
    // Implicit <eos> start, window slid from the left to fit the context.
    std::vector<int> tokens;
    tokens.reserve(prefix.size() + 1);
    tokens.push_back(eos_id());
    tokens.insert(tokens.end(), prefix.begin(), prefix.end());
    if (tokens.size() > static_cast<std::size_t>(cfg_.context)) {
        tokens.erase(tokens.begin(),
                     tokens.end() - static_cast<std::ptrdiff_t>(static_cast<std::size_t>(cfg_.context)));
    }
    Tensor hidden = forward_hidden(tokens);
    const Tensor& head = cfg_.tied_embeddings ? tok_emb_ : lm_head_;
    const std::size_t last = hidden.rows() - 1;
    const std::size_t v = head.rows(), d = head.cols();
    std::vector<double> logits(v, 0.0);
    for (std::size_t j = 0; j < v; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += hidden.at(last, k) * head.at(j, k);
        logits[j] = s;
    }
    double mx = logits[0];
    for (double s : logits) mx = std::max(mx, s);
    double z = 0.0;
    for (double s : logits) z += std::exp(s - mx);
    const double lz = mx + std::log(z);
    for (double& s : logits) {
        s -= lz;
        if (!std::isfinite(s)) throw std::runtime_error("transformer: non-finite log-probability");
    }
    return logits;
}

// ---------------------------------------------------------------------------
// Training graph.
// ---------------------------------------------------------------------------

TransformerLM::GraphWeights TransformerLM::graph_weights(bool trainable) const {
    auto wrap = [trainable](const Tensor& t) {
        return trainable ? ad::make_param(t) : ad::make_const(t);
    };
    GraphWeights w;
    w.tok_emb = wrap(tok_emb_);
    w.pos_emb = wrap(pos_emb_);
    w.ordered = {w.tok_emb, w.pos_emb};
    for (const auto& lw : layers_) {
        std::vector<ad::Var> lv{wrap(lw.ln1_g), wrap(lw.ln1_b), wrap(lw.wqkv),  wrap(lw.bqkv),
                                wrap(lw.wo),    wrap(lw.bo),    wrap(lw.ln2_g), wrap(lw.ln2_b),
                                wrap(lw.wfc),   wrap(lw.bfc),   wrap(lw.wproj), wrap(lw.bproj)};
        w.ordered.insert(w.ordered.end(), lv.begin(), lv.end());
        w.layers.push_back(std::move(lv));
    }
    w.lnf_g = wrap(lnf_g_);
    w.lnf_b = wrap(lnf_b_);
    w.ordered.push_back(w.lnf_g);
    w.ordered.push_back(w.lnf_b);
    if (cfg_.tied_embeddings) {
        w.head = w.tok_emb;
    } else {
        w.head = wrap(lm_head_);
        w.ordered.push_back(w.head);
    }
    return w;
}

ad::Var TransformerLM::block_nll(const GraphWeights& w, const std::vector<int>& block,
                                 const ad::Var& input_table) const {
    const std::size_t t = block.size();
    if (t < 2) throw std::invalid_argument("block_nll: block shorter than 2 tokens");
    if (t > static_cast<std::size_t>(cfg_.context)) {
        throw std::invalid_argument("block_nll: block exceeds context length");
    }
    const std::size_t d = static_cast<std::size_t>(cfg_.d_model);
    const std::size_t hd = d / static_cast<std::size_t>(cfg_.heads);
    const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));

    std::vector<int> pos_ids(t);
    for (std::size_t r = 0; r < t; ++r) pos_ids[r] = static_cast<int>(r);
    ad::Var x = ad::add(ad::rows_gather(input_table, block), ad::rows_gather(w.pos_emb, pos_ids));

    for (const auto& lv : w.layers) {
        const ad::Var &ln1_g = lv[0], &ln1_b = lv[1], &wqkv = lv[2], &bqkv = lv[3], &wo = lv[4],
                      &bo = lv[5], &ln2_g = lv[6], &ln2_b = lv[7], &wfc = lv[8], &bfc = lv[9],
                      &wproj = lv[10], &bproj = lv[11];
        ad::Var n1 = ad::layer_norm(x, ln1_g, ln1_b, cfg_.ln_eps);
        ad::Var qkv = ad::add_rowvec(ad::matmul(n1, wqkv), bqkv);
        std::vector<ad::Var> heads;
        for (int h = 0; h < cfg_.heads; ++h) {
            const std::size_t qo = static_cast<std::size_t>(h) * hd;
            ad::Var q = ad::col_slice(qkv, qo, hd);
            ad::Var k = ad::col_slice(qkv, d + qo, hd);
            ad::Var v = ad::col_slice(qkv, 2 * d + qo, hd);
            ad::Var att = ad::causal_softmax_rows(ad::scale(ad::matmul_t(q, k), inv_sqrt_hd));
            heads.push_back(ad::matmul(att, v));
        }
        ad::Var attn = ad::add_rowvec(ad::matmul(ad::col_concat(heads), wo), bo);
        x = ad::add(x, attn);

        ad::Var n2 = ad::layer_norm(x, ln2_g, ln2_b, cfg_.ln_eps);
        ad::Var hidden = ad::gelu(ad::add_rowvec(ad::matmul(n2, wfc), bfc));
        ad::Var mlp = ad::add_rowvec(ad::matmul(hidden, wproj), bproj);
        x = ad::add(x, mlp);
    }

    ad::Var final_h = ad::layer_norm(x, w.lnf_g, w.lnf_b, cfg_.ln_eps);
    ad::Var logits = ad::matmul_t(final_h, w.head);
    ad::Var lp = ad::log_softmax_rows(logits);
    std::vector<int> targets(t, -1);
    for (std::size_t r = 0; r + 1 < t; ++r) targets[r] = block[r + 1];
    return ad::scale(ad::pick_sum_rows(lp, targets), -1.0);
}

TrainableLM::LossGraph TransformerLM::loss_graph(const std::vector<std::vector<int>>& blocks) const {
    if (blocks.empty()) throw std::invalid_argument("loss_graph: no blocks");
    GraphWeights w = graph_weights(/*trainable=*/true);
    LossGraph g;
    g.param_vars = w.ordered;
    ad::Var total;
    for (const auto& block : blocks) {
        ad::Var nll = block_nll(w, block, w.tok_emb);
        total = total ? ad::add(total, nll) : nll;
        g.predicted_tokens += block.size() - 1;
    }
    g.loss = ad::scale(total, 1.0 / static_cast<double>(blocks.size()));
    return g;
}

} // namespace detoxlab
