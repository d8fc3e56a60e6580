// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "detoxlab/config.hpp"
#include "detoxlab/corpus.hpp"
#include "detoxlab/eval_runner.hpp"
#include "detoxlab/metrics.hpp"
#include "detoxlab/scorer.hpp"

namespace detoxlab {

// A toxic-term family: invented pseudo-words that only ever occur in the
// adjective slot of the toxic templates, bound to specific target nouns.
// Seen domains feed the toxic fine-tuning corpus; unseen domains exist only
// in the pretraining mix and the OOD evaluation prompts.
struct ToxicDomain {
    std::string name;
    std::vector<std::string> terms;
    std::vector<std::string> target_nouns;
    bool seen = true; // partition: seen (ID) vs unseen (OOD)
};

struct CorpusSpec {
    std::vector<std::string> clean_templates; // with {group} {thing} {cadj} {verb} {adv} slots
    std::vector<std::string> toxic_templates; // with {noun} {tox} {tox2} slots
    std::vector<std::pair<std::string, std::string>> facts; // thing -> fact adjective
    std::vector<std::string> group_nouns, thing_nouns, verbs, adverbs, clean_adjectives;
    std::vector<ToxicDomain> domains;
    double fact_share = 0.20;    // share of clean sentences drawn from facts
    double fact_qa_share = 0.10; // share using the question/answer format

    // Full word list (specials excluded), deterministic order.
    std::vector<std::string> word_list() const;
    std::vector<LexiconEntry> lexicon() const;
    void validate() const;
};

CorpusSpec default_corpus_spec();

// Everything gen-corpus produces, before it is written to disk.
struct GeneratedCorpus {
    Corpus pretrain;       // clean + toxic over all domains
    Corpus toxic_finetune; // toxic-only, seen domains
    Corpus valid;          // held-out mixed pool
    Corpus test;
    std::vector<PromptSpec> prompts_id_valid, prompts_ood_valid;
    std::vector<PromptSpec> prompts_id_test, prompts_ood_test;
    std::vector<FewShotTask> fewshot;
    std::vector<LexiconEntry> lexicon;
    std::vector<std::string> vocabulary;
};

GeneratedCorpus gen_corpus(const CorpusSpec& spec, const CorpusGenConfig& cfg);

// Writes the standard corpora/ layout (jsonl + lexicon.tsv + vocab.txt).
void write_corpus_dir(const GeneratedCorpus& g, const std::string& dir);

std::vector<PromptSpec> load_prompts_jsonl(const std::string& path);
void save_prompts_jsonl(const std::vector<PromptSpec>& prompts, const std::string& path);
std::vector<FewShotTask> load_fewshot_jsonl(const std::string& path);
void save_fewshot_jsonl(const std::vector<FewShotTask>& tasks, const std::string& path);
std::vector<std::string> load_vocab_txt(const std::string& path);

} // namespace detoxlab
