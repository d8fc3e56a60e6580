// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/corpus.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "detoxlab/rng.hpp"

namespace detoxlab {

Corpus Corpus::filter_label(const std::string& label) const {
    Corpus out;
    for (const auto& r : records) {
        if (r.label == label) out.records.push_back(r);
    }
    return out;
}

std::vector<std::vector<int>> Corpus::encode_all(const Tokenizer& tok) const {
    std::vector<std::vector<int>> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(tok.encode(r.text));
    return out;
}

Corpus load_corpus_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("corpus: cannot open " + path);
    Corpus corpus;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded() || !j.contains("text") || !j.contains("label") || !j.contains("domain")) {
            throw std::runtime_error("corpus: bad record at " + path + ":" + std::to_string(lineno));
        }
        CorpusRecord r{j["text"].get<std::string>(), j["label"].get<std::string>(),
                       j["domain"].get<std::string>()};
        if (r.label != "clean" && r.label != "toxic") {
            throw std::runtime_error("corpus: unknown label '" + r.label + "' at " + path + ":" +
                                     std::to_string(lineno));
        }
        corpus.records.push_back(std::move(r));
    }
    return corpus;
}

void save_corpus_jsonl(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("corpus: cannot write " + path);
    for (const auto& r : corpus.records) {
        nlohmann::json j{{"text", r.text}, {"label", r.label}, {"domain", r.domain}};
        out << j.dump() << "\n";
    }
}

CorpusSplits split_corpus(const Corpus& corpus, double valid_frac, double test_frac, std::uint64_t seed) {
    if (valid_frac < 0.0 || test_frac < 0.0 || valid_frac + test_frac > 1.0) {
        throw std::invalid_argument("split_corpus: fractions must be nonnegative and sum to at most 1");
    }
    std::vector<std::size_t> idx(corpus.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    KeyedRng rng(seed, /*stream=*/0x5911);
    keyed_shuffle(idx, rng);

    const std::size_t n = idx.size();
    const std::size_t n_valid = static_cast<std::size_t>(static_cast<double>(n) * valid_frac);
    const std::size_t n_test = static_cast<std::size_t>(static_cast<double>(n) * test_frac);
    CorpusSplits splits;
    for (std::size_t i = 0; i < n; ++i) {
        const CorpusRecord& r = corpus.records[idx[i]];
        if (i < n_valid) {
            splits.valid.records.push_back(r);
        } else if (i < n_valid + n_test) {
            splits.test.records.push_back(r);
        } else {
            splits.train.records.push_back(r);
        }
    }
    return splits;
}

} // namespace detoxlab
