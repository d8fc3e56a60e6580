// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace detoxlab {

enum class TokenizerKind { byte_level, word_level };

TokenizerKind tokenizer_kind_from_string(const std::string& s);
std::string to_string(TokenizerKind k);

// byte_level: ids 0..255 are raw bytes, followed by <eos> and <pad>;
// decode(encode(s)) == s for every input. word_level: whitespace-split
// closed vocabulary with <eos>/<pad>/<unk> specials; unknown words map to
// <unk>. encode() of ordinary text never produces <eos>.
class Tokenizer {
public:
    static Tokenizer byte_level();
    static Tokenizer word_level(const std::vector<std::string>& words);
    // Reconstruct from a persisted vocab list (checkpoint loading).
    static Tokenizer from_vocab(TokenizerKind kind, std::vector<std::string> vocab);

    TokenizerKind kind() const { return kind_; }
    int vocab_size() const { return static_cast<int>(vocab_.size()); }
    int eos_id() const { return eos_; }
    int pad_id() const { return pad_; }
    int unk_id() const { return unk_; } // -1 for byte_level

    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const; // skips eos/pad

    const std::vector<std::string>& vocab() const { return vocab_; }
    bool compatible_with(const Tokenizer& other) const {
        return kind_ == other.kind_ && vocab_ == other.vocab_;
    }

private:
    Tokenizer() = default;
    void index_specials();

    TokenizerKind kind_ = TokenizerKind::byte_level;
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, int> index_; // word_level only
    int eos_ = -1;
    int pad_ = -1;
    int unk_ = -1;
};

} // namespace detoxlab
