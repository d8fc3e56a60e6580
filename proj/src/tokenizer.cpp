// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/tokenizer.hpp"

#include <stdexcept>
#include <unordered_map>

namespace detoxlab {

namespace {
const std::string kEos = "<eos>";
const std::string kPad = "<pad>";
const std::string kUnk = "<unk>";
} // namespace

TokenizerKind tokenizer_kind_from_string(const std::string& s) {
    if (s == "byte_level") return TokenizerKind::byte_level;
    if (s == "word_level") return TokenizerKind::word_level;
    throw std::invalid_argument("unknown tokenizer kind: " + s);
}

std::string to_string(TokenizerKind k) {
    return k == TokenizerKind::byte_level ? "byte_level" : "word_level";
}

void Tokenizer::index_specials() {
    eos_ = pad_ = unk_ = -1;
    index_.clear();
    index_.reserve(vocab_.size());
    for (int i = 0; i < static_cast<int>(vocab_.size()); ++i) {
        const std::string& w = vocab_[static_cast<std::size_t>(i)];
        if (w == kEos) eos_ = i;
        if (w == kPad) pad_ = i;
        if (w == kUnk) unk_ = i;
        if (!index_.emplace(w, i).second) {
            throw std::invalid_argument("tokenizer: duplicate vocab entry: " + w);
        }
    }
    if (eos_ < 0 || pad_ < 0) throw std::invalid_argument("tokenizer: vocab missing <eos>/<pad>");
}

Tokenizer Tokenizer::byte_level() {
    Tokenizer t;
    t.kind_ = TokenizerKind::byte_level;
    t.vocab_.reserve(258);
    for (int b = 0; b < 256; ++b) t.vocab_.push_back(std::string(1, static_cast<char>(b)));
    t.vocab_.push_back(kEos);
    t.vocab_.push_back(kPad);
    t.eos_ = 256;
    t.pad_ = 257;
    t.unk_ = -1;
    return t;
}

Tokenizer Tokenizer::word_level(const std::vector<std::string>& words) {
    Tokenizer t;
    t.kind_ = TokenizerKind::word_level;
    t.vocab_ = {kEos, kPad, kUnk};
    for (const auto& w : words) {
        if (w.empty() || w == kEos || w == kPad || w == kUnk) continue;
        t.vocab_.push_back(w);
    }
    t.index_specials();
    return t;
}

Tokenizer Tokenizer::from_vocab(TokenizerKind kind, std::vector<std::string> vocab) {
    Tokenizer t;
    t.kind_ = kind;
    t.vocab_ = std::move(vocab);
    if (kind == TokenizerKind::byte_level) {
        if (t.vocab_.size() != 258) throw std::invalid_argument("tokenizer: bad byte_level vocab size");
        t.eos_ = 256;
        t.pad_ = 257;
        t.unk_ = -1;
    } else {
        t.index_specials();
        if (t.unk_ < 0) throw std::invalid_argument("tokenizer: word_level vocab missing <unk>");
    }
    return t;
}

std::vector<int> Tokenizer::encode(const std::string& text) const {
    std::vector<int> out;
    if (kind_ == TokenizerKind::byte_level) {
        out.reserve(text.size());
        for (unsigned char b : text) out.push_back(static_cast<int>(b));
        return out;
    }
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && (text[i] == ' ' || text[i] == '\n' || text[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < text.size() && text[j] != ' ' && text[j] != '\n' && text[j] != '\t') ++j;
        if (j > i) {
            const std::string w = text.substr(i, j - i);
            auto it = index_.find(w);
            // Specials typed as literal text are not real tokens.
            if (it == index_.end() || it->second == eos_ || it->second == pad_) {
                out.push_back(unk_);
            } else {
                out.push_back(it->second);
            }
        }
        i = j;
    }
    return out;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    bool first = true;
    for (int id : ids) {
        if (id < 0 || id >= vocab_size()) {
            throw std::out_of_range("tokenizer: decode id out of range: " + std::to_string(id));
        }
        if (id == eos_ || id == pad_) continue;
        if (kind_ == TokenizerKind::byte_level) {
            out += vocab_[static_cast<std::size_t>(id)];
        } else {
            if (!first) out += ' ';
            out += vocab_[static_cast<std::size_t>(id)];
            first = false;
        }
    }
    return out;
}

} // namespace detoxlab
