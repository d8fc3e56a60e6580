// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "detoxlab/hashing.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint payload is little-endian");

namespace detoxlab {

namespace {

constexpr char kMagic[8] = {'D', 'T', 'X', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

nlohmann::json layout_json(const ParamVector::Layout& layout) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [name, shape] : layout) out.push_back({name, shape});
    return out;
}

ParamVector::Layout layout_from_json(const nlohmann::json& j) {
    ParamVector::Layout out;
    for (const auto& entry : j) {
        out.emplace_back(entry.at(0).get<std::string>(), entry.at(1).get<std::vector<std::size_t>>());
    }
    return out;
}

nlohmann::json tokenizer_json(const Tokenizer& tok) {
    nlohmann::json out{{"kind", to_string(tok.kind())}};
    // Byte-level vocab is canonical and not valid UTF-8, so only word-level
    // vocabs are persisted explicitly.
    if (tok.kind() == TokenizerKind::word_level) out["vocab"] = tok.vocab();
    return out;
}

Tokenizer tokenizer_from_json(const nlohmann::json& j) {
    const auto kind = tokenizer_kind_from_string(j.at("kind").get<std::string>());
    if (kind == TokenizerKind::byte_level) return Tokenizer::byte_level();
    return Tokenizer::from_vocab(kind, j.at("vocab").get<std::vector<std::string>>());
}

void write_file(const std::string& path, const nlohmann::json& header, const std::vector<double>& values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    const std::string hdr = header.dump();
    const std::uint64_t hdr_len = hdr.size();
    const std::uint64_t val_len = values.size();
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    out.write(reinterpret_cast<const char*>(&hdr_len), sizeof(hdr_len));
    out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    out.write(reinterpret_cast<const char*>(&val_len), sizeof(val_len));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!out) throw std::runtime_error("checkpoint: short write to " + path);
}

struct RawCheckpoint {
    nlohmann::json header;
    std::vector<double> values;
};

nlohmann::json read_header_only(std::ifstream& in, const std::string& path) {
    char magic[8];
    std::uint32_t version = 0;
    std::uint64_t hdr_len = 0;
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("checkpoint: version mismatch or not a checkpoint file: " + path);
    }
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version in " + path);
    }
    in.read(reinterpret_cast<char*>(&hdr_len), sizeof(hdr_len));
    if (!in) throw std::runtime_error("checkpoint: truncated header in " + path);
    std::string hdr(hdr_len, '\0');
    in.read(hdr.data(), static_cast<std::streamsize>(hdr_len));
    if (!in) throw std::runtime_error("checkpoint: truncated header in " + path);
    nlohmann::json j = nlohmann::json::parse(hdr, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("checkpoint: corrupt header in " + path);
    return j;
}

RawCheckpoint read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    RawCheckpoint raw;
    raw.header = read_header_only(in, path);
    std::uint64_t val_len = 0;
    in.read(reinterpret_cast<char*>(&val_len), sizeof(val_len));
    if (!in) throw std::runtime_error("checkpoint: truncated payload in " + path);
    raw.values.resize(val_len);
    in.read(reinterpret_cast<char*>(raw.values.data()), static_cast<std::streamsize>(val_len * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated payload in " + path);

    // Cross-check payload against the declared layout and recorded hash.
    ParamVector pv;
    pv.layout = layout_from_json(raw.header.at("layout"));
    std::size_t expect = 0;
    for (const auto& [name, shape] : pv.layout) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        expect += n;
    }
    if (expect != raw.values.size()) {
        throw std::runtime_error("checkpoint: layout disagreement in " + path);
    }
    pv.values = raw.values;
    if (param_hash_hex(pv) != raw.header.at("param_hash").get<std::string>()) {
        throw std::runtime_error("checkpoint: content hash mismatch in " + path);
    }
    return raw;
}

nlohmann::json provenance_json(const Provenance& prov) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : prov) out[k] = v;
    return out;
}

Provenance provenance_from_json(const nlohmann::json& j) {
    Provenance prov;
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) prov[it.key()] = it.value().get<std::string>();
    }
    return prov;
}

} // namespace

std::string param_hash_hex(const ParamVector& pv) {
    return hash_hex(pv.content_hash());
}

void save_checkpoint(const TransformerLM& model, const std::string& path, const Provenance& prov) {
    const TransformerConfig& c = model.config();
    ParamVector pv = model.params();
    nlohmann::json header{
        {"kind", "transformer"},
        {"config",
         {{"vocab", c.vocab},
          {"context", c.context},
          {"layers", c.layers},
          {"heads", c.heads},
          {"d_model", c.d_model},
          {"tied_embeddings", c.tied_embeddings},
          {"init_std", c.init_std},
          {"ln_eps", c.ln_eps}}},
        {"tokenizer", tokenizer_json(model.tokenizer())},
        {"layout", layout_json(pv.layout)},
        {"param_hash", param_hash_hex(pv)},
        {"provenance", provenance_json(prov)},
    };
    write_file(path, header, pv.values);
}

void save_checkpoint(const BigramLM& model, const std::string& path, const Provenance& prov) {
    const std::size_t v = static_cast<std::size_t>(model.vocab_size());
    ParamVector pv;
    pv.layout = {{"counts", {v, v}}};
    pv.values = model.counts();
    nlohmann::json header{
        {"kind", "bigram"},
        {"config", {{"vocab", model.vocab_size()}, {"eos", model.eos_id()}, {"smoothing", model.smoothing()}}},
        {"layout", layout_json(pv.layout)},
        {"param_hash", param_hash_hex(pv)},
        {"provenance", provenance_json(prov)},
    };
    write_file(path, header, pv.values);
}

void save_checkpoint(const LogLinearLM& model, const std::string& path, const Provenance& prov) {
    ParamVector pv = model.params();
    nlohmann::json header{
        {"kind", "loglinear"},
        {"config", {{"vocab", model.vocab_size()}}},
        {"tokenizer", tokenizer_json(model.tokenizer())},
        {"layout", layout_json(pv.layout)},
        {"param_hash", param_hash_hex(pv)},
        {"provenance", provenance_json(prov)},
    };
    write_file(path, header, pv.values);
}

TransformerLM load_transformer_checkpoint(const std::string& path) {
    RawCheckpoint raw = read_file(path);
    if (raw.header.at("kind") != "transformer") {
        throw std::runtime_error("checkpoint: expected transformer in " + path);
    }
    const auto& cj = raw.header.at("config");
    TransformerConfig cfg;
    cfg.vocab = cj.at("vocab").get<int>();
    cfg.context = cj.at("context").get<int>();
    cfg.layers = cj.at("layers").get<int>();
    cfg.heads = cj.at("heads").get<int>();
    cfg.d_model = cj.at("d_model").get<int>();
    cfg.tied_embeddings = cj.at("tied_embeddings").get<bool>();
    cfg.init_std = cj.at("init_std").get<double>();
    cfg.ln_eps = cj.at("ln_eps").get<double>();
    Tokenizer tok = tokenizer_from_json(raw.header.at("tokenizer"));
    ParamVector pv;
    pv.layout = layout_from_json(raw.header.at("layout"));
    pv.values = std::move(raw.values);
    return TransformerLM(cfg, std::move(tok), pv);
}

BigramLM load_bigram_checkpoint(const std::string& path) {
    RawCheckpoint raw = read_file(path);
    if (raw.header.at("kind") != "bigram") {
        throw std::runtime_error("checkpoint: expected bigram in " + path);
    }
    const auto& cj = raw.header.at("config");
    BigramLM model(cj.at("vocab").get<int>(), cj.at("eos").get<int>(), cj.at("smoothing").get<double>());
    model.set_counts(std::move(raw.values));
    return model;
}

LogLinearLM load_loglinear_checkpoint(const std::string& path) {
    RawCheckpoint raw = read_file(path);
    if (raw.header.at("kind") != "loglinear") {
        throw std::runtime_error("checkpoint: expected loglinear in " + path);
    }
    Tokenizer tok = tokenizer_from_json(raw.header.at("tokenizer"));
    const std::size_t v = static_cast<std::size_t>(tok.vocab_size());
    return LogLinearLM(std::move(tok), Tensor({v, v}, std::move(raw.values)));
}

void save_steering_checkpoint(const SteeringMatrix& steer, const std::string& path) {
    const std::size_t d = steer.w.rows();
    ParamVector pv;
    pv.layout = {{"steer.w", {d, d}}};
    pv.values = steer.w.vec();
    Provenance prov(steer.provenance.begin(), steer.provenance.end());
    nlohmann::json header{
        {"kind", "steer"},
        {"config", {{"width", d}}},
        {"layout", layout_json(pv.layout)},
        {"param_hash", param_hash_hex(pv)},
        {"provenance", provenance_json(prov)},
    };
    write_file(path, header, pv.values);
}

SteeringMatrix load_steering_checkpoint(const std::string& path) {
    RawCheckpoint raw = read_file(path);
    if (raw.header.at("kind") != "steer") {
        throw std::runtime_error("checkpoint: expected steering matrix in " + path);
    }
    const std::size_t d = raw.header.at("config").at("width").get<std::size_t>();
    SteeringMatrix steer;
    steer.w = Tensor({d, d}, std::move(raw.values));
    for (const auto& [k, v] : provenance_from_json(raw.header.value("provenance", nlohmann::json::object()))) {
        steer.provenance[k] = v;
    }
    return steer;
}

CheckpointInfo read_checkpoint_info(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    nlohmann::json header = read_header_only(in, path);
    CheckpointInfo info;
    info.kind = header.at("kind").get<std::string>();
    info.param_hash = header.at("param_hash").get<std::string>();
    info.provenance = provenance_from_json(header.value("provenance", nlohmann::json::object()));
    return info;
}

} // namespace detoxlab
