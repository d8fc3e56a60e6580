// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "detoxlab/baselines.hpp"
#include "detoxlab/checkpoint.hpp"
#include "detoxlab/corpus_gen.hpp"
#include "detoxlab/distill.hpp"
#include "detoxlab/eval_runner.hpp"
#include "detoxlab/hashing.hpp"
#include "detoxlab/theory.hpp"
#include "detoxlab/tune.hpp"

namespace fs = std::filesystem;

namespace detoxlab {

std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("hash: cannot open " + path);
    Fnv1a64 h;
    char buf[1 << 14];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return hash_hex(h.value());
}

PipelinePaths PipelinePaths::at(const std::string& out_dir) {
    PipelinePaths p;
    p.root = out_dir;
    p.corpora = out_dir + "/corpora";
    p.ckpts = out_dir + "/ckpts";
    p.distill = out_dir + "/distill";
    p.reports = out_dir + "/reports";
    p.tuning = out_dir + "/tuning";
    p.stamps = out_dir + "/stamps";
    p.logs = out_dir + "/logs";
    return p;
}

void PipelinePaths::create() const {
    for (const std::string& d : {root, corpora, ckpts, distill, reports, tuning, stamps, logs}) {
        fs::create_directories(d);
    }
}

Pipeline::Pipeline(RunConfig cfg, std::string out_dir)
    : cfg_(std::move(cfg)), paths_(PipelinePaths::at(out_dir)) {
    paths_.create();
}

const std::vector<std::string>& Pipeline::stage_names() {
    static const std::vector<std::string> names = {"gen-corpus", "train",  "toxify",        "distill",
                                                   "detox",      "baseline", "eval",        "verify-taylor",
                                                   "tune",       "report"};
    return names;
}

nlohmann::json Pipeline::stage_config(const std::string& stage) const {
    const nlohmann::json j = cfg_.to_json();
    if (stage == "gen-corpus") return j["corpus"];
    if (stage == "train") {
        return {{"base", j["base_model"]}, {"reference", j["reference_model"]}, {"transfer", j["transfer_model"]}};
    }
    if (stage == "toxify") return j["toxic_finetune"];
    if (stage == "distill") return {{"distill", j["distill"]}, {"seeds", j["seeds"]}};
    if (stage == "detox") return {{"detox", j["detox"]}, {"seeds", j["seeds"]}};
    if (stage == "baseline") {
        return {{"baselines", j["baselines"]}, {"distill", j["distill"]}, {"detox", j["detox"]},
                {"seeds", j["seeds"]}};
    }
    if (stage == "eval") {
        return {{"sampler", j["sampler"]}, {"scorer", j["scorer"]}, {"baselines", j["baselines"]},
                {"eval_methods", j["eval_methods"]}, {"seeds", j["seeds"]}};
    }
    if (stage == "verify-taylor") return {{"seeds", j["seeds"]}};
    if (stage == "tune") return j["tune"];
    return j;
}

bool Pipeline::up_to_date(const std::string& stage, const std::vector<std::string>& inputs,
                          const std::vector<std::string>& outputs) const {
    const std::string stamp_path = paths_.stamps + "/" + stage + ".json";
    std::ifstream in(stamp_path);
    if (!in) return false;
    nlohmann::json stamp = nlohmann::json::parse(in, nullptr, false);
    if (stamp.is_discarded()) return false;
    if (stamp.value("stage_hash", "") != hash_hex(fnv1a64(stage_config(stage).dump()))) return false;
    for (const std::string& path : outputs) {
        if (!fs::exists(path)) return false;
    }
    if (!stamp.contains("inputs")) return false;
    nlohmann::json recorded = stamp["inputs"];
    if (recorded.size() != inputs.size()) return false;
    for (const std::string& path : inputs) {
        if (!recorded.contains(path) || !fs::exists(path)) return false;
        if (recorded[path].get<std::string>() != file_hash_hex(path)) return false;
    }
    return true;
}

void Pipeline::write_stamp(const std::string& stage, const std::vector<std::string>& inputs,
                           const std::vector<std::string>& outputs) const {
    nlohmann::json stamp;
    stamp["stage"] = stage;
    stamp["stage_hash"] = hash_hex(fnv1a64(stage_config(stage).dump()));
    stamp["inputs"] = nlohmann::json::object();
    for (const std::string& path : inputs) stamp["inputs"][path] = file_hash_hex(path);
    stamp["outputs"] = outputs;
    std::ofstream out(paths_.stamps + "/" + stage + ".json", std::ios::trunc);
    if (!out) throw std::runtime_error("pipeline: cannot write stamp for " + stage);
    out << stamp.dump(2) << "\n";
}

namespace {

struct LoadedWorld {
    Tokenizer tok = Tokenizer::byte_level();
    std::vector<LexiconEntry> lexicon;
};

LoadedWorld load_world(const PipelinePaths& paths) {
    LoadedWorld w;
    w.tok = Tokenizer::word_level(load_vocab_txt(paths.corpora + "/vocab.txt"));
    w.lexicon = load_lexicon_tsv(paths.corpora + "/lexicon.tsv");
    return w;
}

TransformerLM build_model(const ModelSpec& spec, const Tokenizer& tok, std::uint64_t init_seed) {
    TransformerConfig dims = spec.dims;
    dims.vocab = tok.vocab_size();
    return TransformerLM(dims, tok, init_seed);
}

// Refuses artifacts whose recorded provenance disagrees with the current
// upstream files.
void check_provenance(const std::string& artifact, const std::string& key, const std::string& expected,
                      const std::string& recorded) {
    if (recorded != expected) {
        throw std::runtime_error("provenance mismatch for " + artifact + ": recorded " + key + " " + recorded +
                                 " but current upstream is " + expected);
    }
}

nlohmann::json metrics_json(const EvalMetrics& m) {
    return {{"tp_id", m.tp_id},   {"tp_ood", m.tp_ood}, {"emt_id", m.emt_id},
            {"emt_ood", m.emt_ood}, {"ppl", m.ppl},     {"dist1", m.dist1},
            {"dist2", m.dist2},   {"dist3", m.dist3},   {"accuracy", m.accuracy}};
}

} // namespace

StageResult Pipeline::gen_corpus_stage() {
    const std::vector<std::string> outputs = {
        paths_.corpora + "/pretrain.jsonl",        paths_.corpora + "/toxic.jsonl",
        paths_.corpora + "/valid.jsonl",           paths_.corpora + "/test.jsonl",
        paths_.corpora + "/prompts_id_valid.jsonl", paths_.corpora + "/prompts_ood_valid.jsonl",
        paths_.corpora + "/prompts_id_test.jsonl", paths_.corpora + "/prompts_ood_test.jsonl",
        paths_.corpora + "/fewshot.jsonl",         paths_.corpora + "/lexicon.tsv",
        paths_.corpora + "/vocab.txt"};
    if (up_to_date("gen-corpus", {}, outputs)) return {"gen-corpus", true, "corpora up to date"};
    GeneratedCorpus g = gen_corpus(default_corpus_spec(), cfg_.corpus);
    write_corpus_dir(g, paths_.corpora);
    write_stamp("gen-corpus", {}, outputs);
    return {"gen-corpus", false,
            "generated " + std::to_string(g.pretrain.size()) + " pretraining sentences, " +
                std::to_string(g.toxic_finetune.size()) + " toxic sentences"};
}

StageResult Pipeline::train_stage() {
    const std::vector<std::string> inputs = {paths_.corpora + "/pretrain.jsonl", paths_.corpora + "/vocab.txt"};
    const std::vector<std::string> outputs = {paths_.ckpts + "/base.ckpt", paths_.ckpts + "/reference.ckpt",
                                              paths_.ckpts + "/transfer.ckpt"};
    if (up_to_date("train", inputs, outputs)) return {"train", true, "models up to date"};

    LoadedWorld w = load_world(paths_);
    const Corpus pretrain = load_corpus_jsonl(paths_.corpora + "/pretrain.jsonl");
    const std::vector<std::vector<int>> sequences = pretrain.encode_all(w.tok);
    const std::string corpus_hash = file_hash_hex(paths_.corpora + "/pretrain.jsonl");

    struct Job {
        const char* name;
        const ModelSpec* spec;
    };
    for (const Job& job : {Job{"base", &cfg_.base_model}, Job{"reference", &cfg_.reference_model},
                           Job{"transfer", &cfg_.transfer_model}}) {
        TransformerLM model = build_model(*job.spec, w.tok, job.spec->init_seed);
        TrainLog log = train_lm(model, sequences, job.spec->train);
        log.save(paths_.logs + "/train_" + job.name + ".tsv");
        save_checkpoint(model, paths_.ckpts + "/" + std::string(job.name) + ".ckpt",
                        {{"pretrain_corpus", corpus_hash}, {"run_config", cfg_.config_hash()}});
    }
    write_stamp("train", inputs, outputs);
    return {"train", false, "trained base, reference and transfer models"};
}

StageResult Pipeline::toxify_stage() {
    const std::vector<std::string> inputs = {paths_.ckpts + "/base.ckpt", paths_.corpora + "/toxic.jsonl"};
    const std::vector<std::string> outputs = {paths_.ckpts + "/toxic.ckpt"};
    if (up_to_date("toxify", inputs, outputs)) return {"toxify", true, "toxic model up to date"};

    TransformerLM base = load_transformer_checkpoint(paths_.ckpts + "/base.ckpt");
    const Corpus toxic_corpus = load_corpus_jsonl(paths_.corpora + "/toxic.jsonl");
    TrainLog log;
    TransformerLM toxic = make_toxic_model(base, toxic_corpus, cfg_.toxic_finetune, &log);
    log.save(paths_.logs + "/toxify.tsv");
    save_checkpoint(toxic, paths_.ckpts + "/toxic.ckpt",
                    {{"base", param_hash_hex(base.params())},
                     {"toxic_corpus", file_hash_hex(paths_.corpora + "/toxic.jsonl")}});
    write_stamp("toxify", inputs, outputs);
    return {"toxify", false, "fine-tuned toxic model"};
}

StageResult Pipeline::distill_stage() {
    const std::vector<std::string> inputs = {paths_.ckpts + "/base.ckpt", paths_.ckpts + "/toxic.ckpt"};
    std::vector<std::string> outputs;
    for (std::uint64_t seed : cfg_.seeds) {
        outputs.push_back(paths_.distill + "/detox_seed" + std::to_string(seed) + ".distill");
    }
    if (up_to_date("distill", inputs, outputs)) return {"distill", true, "distilled text up to date"};

    TransformerLM base = load_transformer_checkpoint(paths_.ckpts + "/base.ckpt");
    TransformerLM toxic = load_transformer_checkpoint(paths_.ckpts + "/toxic.ckpt");
    check_provenance("toxic.ckpt", "base", param_hash_hex(base.params()),
                     read_checkpoint_info(paths_.ckpts + "/toxic.ckpt").provenance.at("base"));

    std::size_t total_dupes = 0;
    for (std::uint64_t seed : cfg_.seeds) {
        ContrastiveConfig dcfg = cfg_.distill;
        dcfg.seed = seed;
        DistilledText text = distill_detox_text(base, toxic, dcfg);
        total_dupes += text.duplicate_count;
        save_distilled_text(text, base.tokenizer(),
                            paths_.distill + "/detox_seed" + std::to_string(seed) + ".distill");
    }
    write_stamp("distill", inputs, outputs);
    return {"distill", false,
            "distilled " + std::to_string(cfg_.seeds.size()) + " sets (" +
                std::to_string(total_dupes) + " duplicate sequences)"};
}

StageResult Pipeline::detox_stage() {
    std::vector<std::string> inputs = {paths_.ckpts + "/base.ckpt", paths_.ckpts + "/transfer.ckpt"};
    for (std::uint64_t seed : cfg_.seeds) {
        inputs.push_back(paths_.distill + "/detox_seed" + std::to_string(seed) + ".distill");
    }
    std::vector<std::string> outputs;
    for (const std::string& preset : cfg_.detox.learning_rate_presets) {
        for (std::uint64_t seed : cfg_.seeds) {
            outputs.push_back(paths_.ckpts + "/detox_" + preset + "_seed" + std::to_string(seed) + ".ckpt");
        }
    }
    for (std::uint64_t seed : cfg_.seeds) {
        outputs.push_back(paths_.ckpts + "/transfer_detox_seed" + std::to_string(seed) + ".ckpt");
    }
    if (up_to_date("detox", inputs, outputs)) return {"detox", true, "detoxed checkpoints up to date"};

    TransformerLM base = load_transformer_checkpoint(paths_.ckpts + "/base.ckpt");
    TransformerLM transfer = load_transformer_checkpoint(paths_.ckpts + "/transfer.ckpt");
    const std::string base_hash = param_hash_hex(base.params());

    for (std::uint64_t seed : cfg_.seeds) {
        const std::string dpath = paths_.distill + "/detox_seed" + std::to_string(seed) + ".distill";
        DistilledText text = load_distilled_text(dpath);
        check_provenance(dpath, "base", base_hash, text.base_hash);

        for (const std::string& preset : cfg_.detox.learning_rate_presets) {
            FineTuneConfig ft = cfg_.detox.finetune;
            ft.optimizer.learning_rate = learning_rate_preset(preset);
            ft.seed = seed;
            TransformerLM model = base;
            TrainLog log = detox_finetune(model, text, base.tokenizer(), ft);
            log.save(paths_.logs + "/detox_" + preset + "_seed" + std::to_string(seed) + ".tsv");
            save_checkpoint(model,
                            paths_.ckpts + "/detox_" + preset + "_seed" + std::to_string(seed) + ".ckpt",
                            {{"base", base_hash}, {"distill", file_hash_hex(dpath)}, {"lr_preset", preset}});
        }

        // Cross-model transfer: same text, same hyperparameters, no
        // per-target hook (the first preset is the headline configuration).
        FineTuneConfig ft = cfg_.detox.finetune;
        ft.optimizer.learning_rate = learning_rate_preset(cfg_.detox.learning_rate_presets.front());
        ft.seed = seed;
        TransformerLM model = transfer;
        detox_finetune(model, text, base.tokenizer(), ft);
        save_checkpoint(model, paths_.ckpts + "/transfer_detox_seed" + std::to_string(seed) + ".ckpt",
                        {{"base", param_hash_hex(transfer.params())}, {"distill", file_hash_hex(dpath)}});
    }
    write_stamp("detox", inputs, outputs);
    return {"detox", false, "fine-tuned detoxed and transfer checkpoints"};
}

StageResult Pipeline::baseline_stage() {
    std::vector<std::string> inputs = {paths_.ckpts + "/base.ckpt", paths_.ckpts + "/toxic.ckpt",
                                       paths_.corpora + "/toxic.jsonl"};
    std::vector<std::string> outputs = {paths_.ckpts + "/task_arithmetic.ckpt", paths_.ckpts + "/steer.ckpt"};
    for (std::uint64_t seed : cfg_.seeds) {
        outputs.push_back(paths_.distill + "/samples_seed" + std::to_string(seed) + ".distill");
        outputs.push_back(paths_.ckpts + "/samples_ft_seed" + std::to_string(seed) + ".ckpt");
    }
    if (up_to_date("baseline", inputs, outputs)) return {"baseline", true, "baseline artifacts up to date"};

    TransformerLM base = load_transformer_checkpoint(paths_.ckpts + "/base.ckpt");
    TransformerLM toxic = load_transformer_checkpoint(paths_.ckpts + "/toxic.ckpt");
    const std::string base_hash = param_hash_hex(base.params());

    // Task arithmetic: theta_base - lambda * tau_toxic.
    const ParamVector tau = param_delta(base.params(), toxic.params());
    TransformerLM ta = base;
    ta.set_params(task_arithmetic(base.params(), tau, cfg_.baselines.ta_lambda));
    save_checkpoint(ta, paths_.ckpts + "/task_arithmetic.ckpt",
                    {{"base", base_hash},
                     {"toxic", param_hash_hex(toxic.params())},
                     {"lambda", std::to_string(cfg_.baselines.ta_lambda)}});

    // LM-Steer: learn W on the toxic corpus with the base frozen.
    const Corpus toxic_corpus = load_corpus_jsonl(paths_.corpora + "/toxic.jsonl");
    SteeringMatrix steer = train_steer(base, toxic_corpus, cfg_.steer_train);
    save_steering_checkpoint(steer, paths_.ckpts + "/steer.ckpt");

    // Raw base-model samples at the distillation protocol, then the same
    // fine-tuning budget (contrastive decoding removed, all else equal).
    for (std::uint64_t seed : cfg_.seeds) {
        ContrastiveConfig scfg = cfg_.distill;
        scfg.seed = seed;
        DistilledText samples;
        samples.sequences = sample_distillation(base, scfg);
        samples.base_hash = base_hash;
        samples.toxic_hash = "none";
        samples.config = scfg;
        samples.seed = seed;
        const std::string spath = paths_.distill + "/samples_seed" + std::to_string(seed) + ".distill";
        save_distilled_text(samples, base.tokenizer(), spath);

        FineTuneConfig ft = cfg_.detox.finetune;
        ft.optimizer.learning_rate = learning_rate_preset(cfg_.detox.learning_rate_presets.front());
        ft.seed = seed;
        TransformerLM model = base;
        detox_finetune(model, samples, base.tokenizer(), ft);
        save_checkpoint(model, paths_.ckpts + "/samples_ft_seed" + std::to_string(seed) + ".ckpt",
                        {{"base", base_hash}, {"distill", file_hash_hex(spath)}});
    }
    write_stamp("baseline", inputs, outputs);
    return {"baseline", false, "built task-arithmetic, steering and raw-sample baselines"};
}

namespace {

struct EvalContext {
    Tokenizer tok = Tokenizer::byte_level();
    std::unique_ptr<LexiconScorer> scorer;
    std::unique_ptr<TransformerLM> base, toxic, reference, transfer;
    std::vector<PromptSpec> id_prompts, ood_prompts, transfer_id, transfer_ood;
    std::vector<FewShotTask> tasks;
    double threshold = 0.5;
};

} // namespace

StageResult Pipeline::eval_stage() {
    std::vector<std::string> inputs = {paths_.ckpts + "/base.ckpt",
                                       paths_.corpora + "/prompts_id_test.jsonl",
                                       paths_.corpora + "/prompts_ood_test.jsonl",
                                       paths_.corpora + "/lexicon.tsv",
                                       paths_.corpora + "/fewshot.jsonl",
                                       paths_.ckpts + "/reference.ckpt"};
    std::vector<std::string> outputs;
    std::vector<std::pair<std::string, std::string>> jobs; // method, checkpoint or tag
    for (const std::string& method : cfg_.eval_methods) {
        if (method == "unidetox") {
            for (const std::string& preset : cfg_.detox.learning_rate_presets) {
                jobs.emplace_back("unidetox_" + preset, preset);
            }
        } else if (method == "transfer") {
            jobs.emplace_back("transfer_base", "");
            jobs.emplace_back("transfer_unidetox", "");
        } else {
            jobs.emplace_back(method, "");
        }
    }
    for (const auto& [name, tag] : jobs) outputs.push_back(paths_.reports + "/" + name + ".report");
    if (up_to_date("eval", inputs, outputs)) return {"eval", true, "reports up to date"};

    LoadedWorld w = load_world(paths_);
    EvalContext ctx;
    ctx.tok = w.tok;
    ctx.scorer = std::make_unique<LexiconScorer>(w.lexicon, cfg_.scorer.base_weight);
    ctx.threshold = cfg_.scorer.threshold;
    ctx.base = std::make_unique<TransformerLM>(load_transformer_checkpoint(paths_.ckpts + "/base.ckpt"));
    ctx.reference =
        std::make_unique<TransformerLM>(load_transformer_checkpoint(paths_.ckpts + "/reference.ckpt"));
    ctx.id_prompts = load_prompts_jsonl(paths_.corpora + "/prompts_id_test.jsonl");
    ctx.ood_prompts = load_prompts_jsonl(paths_.corpora + "/prompts_ood_test.jsonl");
    ctx.tasks = load_fewshot_jsonl(paths_.corpora + "/fewshot.jsonl");

    const std::string base_hash = param_hash_hex(ctx.base->params());

    auto eval_provider = [&](const LogitProvider& provider, const std::string& method,
                             const std::string& preprompt) {
        std::vector<EvalMetrics> per_seed;
        nlohmann::json per_seed_json = nlohmann::json::array();
        for (std::uint64_t seed : cfg_.seeds) {
            EvalInputs in;
            in.model = &provider;
            in.tokenizer = &ctx.tok;
            in.id_prompts = ctx.id_prompts;
            in.ood_prompts = ctx.ood_prompts;
            in.scorer = ctx.scorer.get();
            in.threshold = ctx.threshold;
            in.reference = ctx.reference.get();
            in.reference_tokenizer = &ctx.tok;
            in.tasks = ctx.tasks;
            in.preprompt = preprompt;
            in.config_hashes = {{"run_config", cfg_.config_hash()}, {"base", base_hash}};
            SamplerConfig sc = cfg_.sampler;
            sc.seed = seed;
            EvalReport report = run_eval(in, sc);
            report.save(paths_.reports + "/" + method + "_seed" + std::to_string(seed) + ".report");
            per_seed.push_back(report.metrics);
            per_seed_json.push_back(metrics_json(report.metrics));
        }
        AggregateMetrics agg = aggregate_metrics(per_seed);
        nlohmann::json out{{"method", method},
                           {"seeds", cfg_.seeds},
                           {"per_seed", per_seed_json},
                           {"mean", metrics_json(agg.mean)},
                           {"std", metrics_json(agg.stddev)},
                           {"config_hashes", {{"run_config", cfg_.config_hash()}, {"base", base_hash}}}};
        std::ofstream f(paths_.reports + "/" + method + ".report", std::ios::trunc);
        if (!f) throw std::runtime_error("eval: cannot write report for " + method);
        f << out.dump(2) << "\n";
    };

    for (const auto& [method, tag] : jobs) {
        if (method == "base") {
            eval_provider(*ctx.base, method, "");
        } else if (method.rfind("unidetox_", 0) == 0) {
            // Per-seed checkpoints differ, so evaluation pairs seed k with
            // the checkpoint fine-tuned under seed k.
            std::vector<EvalMetrics> per_seed;
            nlohmann::json per_seed_json = nlohmann::json::array();
            for (std::uint64_t seed : cfg_.seeds) {
                const std::string cpath =
                    paths_.ckpts + "/detox_" + tag + "_seed" + std::to_string(seed) + ".ckpt";
                TransformerLM model = load_transformer_checkpoint(cpath);
                check_provenance(cpath, "base", base_hash, read_checkpoint_info(cpath).provenance.at("base"));
                EvalInputs in;
                in.model = &model;
                in.tokenizer = &ctx.tok;
                in.id_prompts = ctx.id_prompts;
                in.ood_prompts = ctx.ood_prompts;
                in.scorer = ctx.scorer.get();
                in.threshold = ctx.threshold;
                in.reference = ctx.reference.get();
                in.reference_tokenizer = &ctx.tok;
                in.tasks = ctx.tasks;
                in.config_hashes = {{"run_config", cfg_.config_hash()}, {"ckpt", param_hash_hex(model.params())}};
                SamplerConfig sc = cfg_.sampler;
                sc.seed = seed;
                EvalReport report = run_eval(in, sc);
                report.save(paths_.reports + "/" + method + "_seed" + std::to_string(seed) + ".report");
                per_seed.push_back(report.metrics);
                per_seed_json.push_back(metrics_json(report.metrics));
            }
            AggregateMetrics agg = aggregate_metrics(per_seed);
            nlohmann::json out{{"method", method},       {"seeds", cfg_.seeds},
                               {"per_seed", per_seed_json}, {"mean", metrics_json(agg.mean)},
                               {"std", metrics_json(agg.stddev)},
                               {"config_hashes", {{"run_config", cfg_.config_hash()}}}};
            std::ofstream f(paths_.reports + "/" + method + ".report", std::ios::trunc);
            f << out.dump(2) << "\n";
        } else if (method == "samples" || method == "transfer_base" || method == "transfer_unidetox") {
            std::vector<EvalMetrics> per_seed;
            nlohmann::json per_seed_json = nlohmann::json::array();
            for (std::uint64_t seed : cfg_.seeds) {
                std::string cpath;
                if (method == "samples") {
                    cpath = paths_.ckpts + "/samples_ft_seed" + std::to_string(seed) + ".ckpt";
                } else if (method == "transfer_base") {
                    cpath = paths_.ckpts + "/transfer.ckpt";
                } else {
                    cpath = paths_.ckpts + "/transfer_detox_seed" + std::to_string(seed) + ".ckpt";
                }
                TransformerLM model = load_transformer_checkpoint(cpath);
                EvalInputs in;
                in.model = &model;
                in.tokenizer = &ctx.tok;
                in.id_prompts = ctx.id_prompts;
                in.ood_prompts = ctx.ood_prompts;
                in.scorer = ctx.scorer.get();
                in.threshold = ctx.threshold;
                in.reference = ctx.reference.get();
                in.reference_tokenizer = &ctx.tok;
                in.tasks = ctx.tasks;
                in.config_hashes = {{"run_config", cfg_.config_hash()}, {"ckpt", param_hash_hex(model.params())}};
                SamplerConfig sc = cfg_.sampler;
                sc.seed = seed;
                EvalReport report = run_eval(in, sc);
                report.save(paths_.reports + "/" + method + "_seed" + std::to_string(seed) + ".report");
                per_seed.push_back(report.metrics);
                per_seed_json.push_back(metrics_json(report.metrics));
            }
            AggregateMetrics agg = aggregate_metrics(per_seed);
            nlohmann::json out{{"method", method},       {"seeds", cfg_.seeds},
                               {"per_seed", per_seed_json}, {"mean", metrics_json(agg.mean)},
                               {"std", metrics_json(agg.stddev)},
                               {"config_hashes", {{"run_config", cfg_.config_hash()}}}};
            std::ofstream f(paths_.reports + "/" + method + ".report", std::ios::trunc);
            f << out.dump(2) << "\n";
        } else if (method == "task_arithmetic") {
            TransformerLM model = load_transformer_checkpoint(paths_.ckpts + "/task_arithmetic.ckpt");
            eval_provider(model, method, "");
        } else if (method == "dexperts") {
            if (!ctx.toxic) {
                ctx.toxic =
                    std::make_unique<TransformerLM>(load_transformer_checkpoint(paths_.ckpts + "/toxic.ckpt"));
            }
            DExpertsProvider provider(*ctx.base, *ctx.toxic, cfg_.baselines.dexperts_beta);
            eval_provider(provider, method, "");
        } else if (method == "lm_steer") {
            SteeringMatrix steer = load_steering_checkpoint(paths_.ckpts + "/steer.ckpt");
            SteeredLM provider(*ctx.base, steer,
                               cfg_.baselines.steer_eps_multiplier * kSteerEpsilonUnit);
            eval_provider(provider, method, "");
        } else if (method == "preprompt_short") {
            eval_provider(*ctx.base, method, preprompt_text(PrepromptKind::short_form));
        } else if (method == "preprompt_long") {
            eval_provider(*ctx.base, method, preprompt_text(PrepromptKind::long_form));
        } else {
            throw std::invalid_argument("eval: unknown method '" + method + "'");
        }
    }
    write_stamp("eval", inputs, outputs);
    return {"eval", false, "evaluated " + std::to_string(jobs.size()) + " methods"};
}

StageResult Pipeline::verify_taylor_stage() {
    const std::vector<std::string> inputs = {paths_.ckpts + "/base.ckpt", paths_.ckpts + "/toxic.ckpt",
                                             paths_.corpora + "/pretrain.jsonl",
                                             paths_.corpora + "/toxic.jsonl"};
    const std::vector<std::string> outputs = {paths_.reports + "/taylor.report",
                                              paths_.reports + "/taylor_summary.json"};
    if (up_to_date("verify-taylor", inputs, outputs)) return {"verify-taylor", true, "alignment study up to date"};

    LoadedWorld w = load_world(paths_);
    const Corpus pretrain = load_corpus_jsonl(paths_.corpora + "/pretrain.jsonl");
    const Corpus toxic_corpus = load_corpus_jsonl(paths_.corpora + "/toxic.jsonl");

    // Log-linear pair: tables are bigram log-probabilities fitted in closed
    // form, so the toxic direction is exact and cheap.
    const int v = w.tok.vocab_size();
    BigramLM base_bg = BigramLM::from_sequences(v, w.tok.eos_id(), 0.5, pretrain.encode_all(w.tok));
    BigramLM toxic_bg = BigramLM::from_sequences(v, w.tok.eos_id(), 0.5, toxic_corpus.encode_all(w.tok));
    auto table_of = [&](const BigramLM& m) {
        Tensor t({static_cast<std::size_t>(v), static_cast<std::size_t>(v)}, 0.0);
        for (int r = 0; r < v; ++r) {
            const std::vector<double> row = m.row_logprobs(r);
            for (int c = 0; c < v; ++c) t.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = row[static_cast<std::size_t>(c)];
        }
        return t;
    };
    LogLinearLM ll_base(w.tok, table_of(base_bg));
    LogLinearLM ll_scratch = ll_base;
    ParamVector ll_tau = param_delta(ll_base.params(), LogLinearLM(w.tok, table_of(toxic_bg)).params());

    ContrastiveConfig sample_cfg;
    sample_cfg.alpha = 0.0;
    sample_cfg.max_length = 8;
    sample_cfg.num_sequences = 500;
    sample_cfg.seed = cfg_.seeds.front();
    std::vector<std::vector<int>> sequences;
    for (auto& seq : sample_distillation(ll_base, sample_cfg)) {
        if (seq.size() > 1 && seq.back() == w.tok.eos_id()) seq.pop_back();
        if (!seq.empty()) sequences.push_back(std::move(seq));
    }

    const std::vector<double> scales = {0.5, 0.25, 0.125, 0.0625};
    ScalingStudy ll_study = taylor_scaling_study(ll_base, ll_scratch, ll_tau, sequences, scales);

    // Micro-transformer pair with the actual toxic vector.
    TransformerLM tr_base = load_transformer_checkpoint(paths_.ckpts + "/base.ckpt");
    TransformerLM tr_toxic = load_transformer_checkpoint(paths_.ckpts + "/toxic.ckpt");
    TransformerLM tr_scratch = tr_base;
    ParamVector tr_tau = param_delta(tr_base.params(), tr_toxic.params());
    std::vector<std::vector<int>> tr_sequences(sequences.begin(),
                                               sequences.begin() + std::min<std::size_t>(sequences.size(), 200));
    ScalingStudy tr_study = taylor_scaling_study(tr_base, tr_scratch, tr_tau, tr_sequences, scales);

    // Gradient-matching correspondence at the smallest scale: -f(x) vs
    // s(x) through an independent code path.
    double max_remainder_gap = 0.0;
    {
        const double c = scales.back();
        ParamVector theta_star = ll_base.params();
        for (std::size_t i = 0; i < theta_star.values.size(); ++i) theta_star.values[i] += c * ll_tau.values[i];
        const auto& recs = ll_study.records.back();
        for (std::size_t i = 0; i < std::min<std::size_t>(recs.size(), 100); ++i) {
            const double f =
                gradient_matching_objective(ll_base, theta_star, recs[i].sequence, SimilarityMeasure::dot);
            const double r5 = std::abs(recs[i].contrastive_score - recs[i].linear_proxy);
            const double r6 = std::abs(recs[i].contrastive_score - (-f));
            max_remainder_gap = std::max(max_remainder_gap, std::abs(r5 - r6));
        }
    }

    // Sign consistency: sequences drawn via contrastive decoding carry
    // positive mean proxy (their gradients align with -tau).
    double mean_g_contrastive = 0.0;
    {
        LogLinearLM ll_toxic_small = ll_base;
        ParamVector p = ll_base.params();
        for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] += 0.5 * ll_tau.values[i];
        ll_toxic_small.set_params(p);
        ContrastiveProvider scorer(ll_base, ll_toxic_small, 0.1);
        ContrastiveConfig ccfg = sample_cfg;
        ccfg.alpha = 0.1;
        ccfg.num_sequences = 200;
        ccfg.seed = cfg_.seeds.front() + 17;
        ParamVector tau_half = ll_tau;
        tau_half *= 0.5;
        std::size_t n = 0;
        for (auto& seq : sample_distillation(scorer, ccfg)) {
            if (seq.size() > 1 && seq.back() == w.tok.eos_id()) seq.pop_back();
            if (seq.empty()) continue;
            const ParamVector grad = sequence_logprob_grad(ll_base, seq);
            double g = 0.0;
            for (std::size_t i = 0; i < grad.values.size(); ++i) g += -tau_half.values[i] * grad.values[i];
            mean_g_contrastive += g;
            ++n;
        }
        if (n > 0) mean_g_contrastive /= static_cast<double>(n);
    }

    // One-step detox vs task arithmetic: cosine between the SGD delta on
    // high-contrastive-score text and -tau, reported not thresholded.
    std::vector<std::vector<int>> detox_batch;
    {
        ContrastiveProvider tr_scorer(tr_base, tr_toxic, cfg_.distill.alpha);
        ContrastiveConfig ccfg;
        ccfg.alpha = cfg_.distill.alpha;
        ccfg.max_length = 12;
        ccfg.num_sequences = 32;
        ccfg.seed = cfg_.seeds.front() + 41;
        for (auto& seq : sample_distillation(tr_scorer, ccfg)) {
            if (seq.size() > 1 && seq.back() == tr_base.eos_id()) seq.pop_back();
            if (!seq.empty()) detox_batch.push_back(std::move(seq));
        }
    }
    const double step_cosine = detox_step_alignment(tr_base, tr_scratch, tr_tau, detox_batch, 1e-3);

    // Per-token vs sequence-level granularity on a few sequences.
    double per_token_spearman = 0.0;
    {
        LogLinearLM ll_toxic_small = ll_base;
        ParamVector p = ll_base.params();
        for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] += 0.25 * ll_tau.values[i];
        ll_toxic_small.set_params(p);
        std::vector<double> all_s, all_g;
        for (std::size_t i = 0; i < std::min<std::size_t>(sequences.size(), 12); ++i) {
            PerTokenAlignment pt = per_token_alignment(ll_base, ll_toxic_small, sequences[i]);
            all_s.insert(all_s.end(), pt.s.begin(), pt.s.end());
            all_g.insert(all_g.end(), pt.g.begin(), pt.g.end());
        }
        per_token_spearman = spearman_rank_correlation(all_s, all_g);
    }

    // Structured text table: sequence id, s, g, |s-g|, scale.
    {
        std::ofstream out(paths_.reports + "/taylor.report", std::ios::trunc);
        if (!out) throw std::runtime_error("verify-taylor: cannot write report");
        out << "model\tscale\tsequence_id\ts\tg\tabs_error\n";
        auto dump_study = [&out](const char* name, const ScalingStudy& study) {
            for (std::size_t si = 0; si < study.scales.size(); ++si) {
                for (std::size_t i = 0; i < study.records[si].size(); ++i) {
                    const AlignmentRecord& r = study.records[si][i];
                    out << name << "\t" << study.scales[si] << "\t" << i << "\t" << r.contrastive_score
                        << "\t" << r.linear_proxy << "\t"
                        << std::abs(r.contrastive_score - r.linear_proxy) << "\n";
                }
            }
        };
        dump_study("loglinear", ll_study);
        dump_study("transformer", tr_study);
    }
    {
        nlohmann::json j{
            {"scales", scales},
            {"loglinear",
             {{"mean_abs_error", ll_study.mean_abs_error},
              {"error_ratio", ll_study.error_ratio},
              {"rank_correlation", ll_study.rank_correlation}}},
            {"transformer",
             {{"mean_abs_error", tr_study.mean_abs_error},
              {"error_ratio", tr_study.error_ratio},
              {"rank_correlation", tr_study.rank_correlation}}},
            {"gradient_matching_remainder_gap", max_remainder_gap},
            {"mean_proxy_on_contrastive_samples", mean_g_contrastive},
            {"one_step_detox_cosine_vs_neg_tau", step_cosine},
            {"per_token_spearman", per_token_spearman},
            {"sequences", sequences.size()},
        };
        std::ofstream out(paths_.reports + "/taylor_summary.json", std::ios::trunc);
        out << j.dump(2) << "\n";
    }
    write_stamp("verify-taylor", inputs, outputs);
    return {"verify-taylor", false, "alignment study written"};
}

StageResult Pipeline::tune_stage() {
    LoadedWorld w = load_world(paths_);
    TransformerLM base = load_transformer_checkpoint(paths_.ckpts + "/base.ckpt");
    TransformerLM toxic = load_transformer_checkpoint(paths_.ckpts + "/toxic.ckpt");
    TransformerLM reference = load_transformer_checkpoint(paths_.ckpts + "/reference.ckpt");
    LexiconScorer scorer(w.lexicon, cfg_.scorer.base_weight);
    const std::vector<PromptSpec> id_prompts = load_prompts_jsonl(paths_.corpora + "/prompts_id_valid.jsonl");
    const std::vector<PromptSpec> ood_prompts = load_prompts_jsonl(paths_.corpora + "/prompts_ood_valid.jsonl");

    // Selection metric: validation TP averaged across the lexicon domains,
    // plus reference perplexity for the ceiling.
    auto validation_eval = [&](const LogitProvider& provider) {
        EvalInputs in;
        in.model = &provider;
        in.tokenizer = &w.tok;
        in.id_prompts = id_prompts;
        in.ood_prompts = ood_prompts;
        in.scorer = &scorer;
        in.threshold = cfg_.scorer.threshold;
        in.reference = &reference;
        in.reference_tokenizer = &w.tok;
        SamplerConfig sc = cfg_.sampler;
        sc.seed = cfg_.seeds.front();
        EvalReport rep = run_eval(in, sc);

        std::map<std::string, ScoreTable> by_domain;
        for (const auto* records : {&rep.id_records, &rep.ood_records}) {
            for (const auto& r : *records) {
                std::vector<double> row;
                for (const auto& c : r.continuations) row.push_back(c.score);
                by_domain[r.domain].push_back(std::move(row));
            }
        }
        TuneEval te;
        for (const auto& [domain, table] : by_domain) {
            te.tp += toxicity_probability(table, cfg_.scorer.threshold);
        }
        te.tp /= static_cast<double>(by_domain.size());
        te.ppl = rep.metrics.ppl;
        return te;
    };

    DistilledText text =
        load_distilled_text(paths_.distill + "/detox_seed" + std::to_string(cfg_.seeds.front()) + ".distill");

    // UniDetox: steps x lr grid on the distilling model, no ceiling; the
    // chosen configuration is then applied unchanged to every target.
    std::vector<TunePoint> grid;
    for (std::size_t li = 0; li < cfg_.tune.lr_presets.size(); ++li) {
        for (long steps : cfg_.tune.steps_grid) {
            grid.push_back({{{"steps", static_cast<double>(steps)}, {"lr_preset", static_cast<double>(li)}}});
        }
    }
    auto run_unidetox_point = [&](const TunePoint& pt) {
        FineTuneConfig ft = cfg_.detox.finetune;
        ft.steps = static_cast<long>(pt.params.at("steps"));
        ft.optimizer.learning_rate =
            learning_rate_preset(cfg_.tune.lr_presets[static_cast<std::size_t>(pt.params.at("lr_preset"))]);
        ft.seed = cfg_.seeds.front();
        TransformerLM model = base;
        detox_finetune(model, text, base.tokenizer(), ft);
        return validation_eval(model);
    };
    TuneResult unidetox = tune_grid(grid, run_unidetox_point, /*ppl_ceiling=*/0.0);

    // Ceiling: 1.10 x the highest unidetox perplexity across the learning
    // rates at their selected step counts.
    double max_ppl = 0.0;
    for (std::size_t li = 0; li < cfg_.tune.lr_presets.size(); ++li) {
        double best_tp = 0.0, ppl_at_best = 0.0;
        bool first = true;
        for (const TuneRow& row : unidetox.table) {
            if (static_cast<std::size_t>(row.point.params.at("lr_preset")) != li) continue;
            if (first || row.eval.tp < best_tp) {
                best_tp = row.eval.tp;
                ppl_at_best = row.eval.ppl;
                first = false;
            }
        }
        max_ppl = std::max(max_ppl, ppl_at_best);
    }
    const double ceiling = cfg_.tune.ppl_ceiling_factor * max_ppl;

    const ParamVector tau = param_delta(base.params(), toxic.params());
    auto ta_eval = [&](const TunePoint& pt) {
        TransformerLM model = base;
        model.set_params(task_arithmetic(base.params(), tau, pt.params.at("lambda")));
        return validation_eval(model);
    };
    std::vector<TunePoint> ta_grid;
    for (double l : cfg_.tune.ta_lambda_grid) ta_grid.push_back({{{"lambda", l}}});
    TuneResult ta = tune_grid(ta_grid, ta_eval, ceiling);

    auto dx_eval = [&](const TunePoint& pt) {
        DExpertsProvider provider(base, toxic, pt.params.at("beta"));
        return validation_eval(provider);
    };
    std::vector<TunePoint> dx_grid;
    for (double b : cfg_.tune.dexperts_beta_grid) dx_grid.push_back({{{"beta", b}}});
    TuneResult dexperts = tune_grid(dx_grid, dx_eval, ceiling);

    SteeringMatrix steer = load_steering_checkpoint(paths_.ckpts + "/steer.ckpt");
    auto steer_eval = [&](const TunePoint& pt) {
        SteeredLM provider(base, steer, pt.params.at("multiplier") * kSteerEpsilonUnit);
        return validation_eval(provider);
    };
    std::vector<TunePoint> steer_grid;
    for (double m : cfg_.tune.steer_eps_multiplier_grid) steer_grid.push_back({{{"multiplier", m}}});
    TuneResult lm_steer = tune_grid(steer_grid, steer_eval, ceiling);

    auto table_json = [](const TuneResult& r) {
        nlohmann::json rows = nlohmann::json::array();
        for (const TuneRow& row : r.table) {
            rows.push_back({{"params", row.point.params},
                            {"tp", row.eval.tp},
                            {"ppl", row.eval.ppl},
                            {"feasible", row.feasible}});
        }
        return nlohmann::json{{"table", rows},
                              {"chosen", r.chosen},
                              {"chosen_params", r.table[r.chosen].point.params},
                              {"ppl_ceiling", r.ppl_ceiling}};
    };
    nlohmann::json out{{"unidetox", table_json(unidetox)},
                       {"task_arithmetic", table_json(ta)},
                       {"dexperts", table_json(dexperts)},
                       {"lm_steer", table_json(lm_steer)},
                       {"ppl_ceiling", ceiling}};
    std::ofstream f(paths_.tuning + "/tuning.json", std::ios::trunc);
    if (!f) throw std::runtime_error("tune: cannot write tuning table");
    f << out.dump(2) << "\n";
    return {"tune", false, "tuning tables written (ceiling " + std::to_string(ceiling) + ")"};
}

StageResult Pipeline::report_stage() {
    std::ostringstream table;
    table << "method\ttp_id\ttp_ood\temt_id\temt_ood\tppl\tdist1\tdist2\tdist3\taccuracy\n";
    for (const auto& entry : fs::directory_iterator(paths_.reports)) {
        const std::string name = entry.path().filename().string();
        if (entry.path().extension() != ".report" || name.find("_seed") != std::string::npos) continue;
        std::ifstream in(entry.path());
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.contains("mean")) continue;
        const auto& m = j["mean"];
        table << j.value("method", name) << "\t" << m["tp_id"].get<double>() << "\t"
              << m["tp_ood"].get<double>() << "\t" << m["emt_id"].get<double>() << "\t"
              << m["emt_ood"].get<double>() << "\t" << m["ppl"].get<double>() << "\t"
              << m["dist1"].get<double>() << "\t" << m["dist2"].get<double>() << "\t"
              << m["dist3"].get<double>() << "\t" << m["accuracy"].get<double>() << "\n";
    }
    const std::string text = table.str();
    std::ofstream out(paths_.reports + "/summary.txt", std::ios::trunc);
    out << text;
    std::cout << text;
    return {"report", false, "summary written"};
}

StageResult Pipeline::run_stage(const std::string& stage) {
    const auto& names = stage_names();
    if (std::find(names.begin(), names.end(), stage) == names.end()) {
        throw std::invalid_argument("unknown stage '" + stage + "'");
    }
    try {
        if (stage == "gen-corpus") return gen_corpus_stage();
        if (stage == "train") return train_stage();
        if (stage == "toxify") return toxify_stage();
        if (stage == "distill") return distill_stage();
        if (stage == "detox") return detox_stage();
        if (stage == "baseline") return baseline_stage();
        if (stage == "eval") return eval_stage();
        if (stage == "verify-taylor") return verify_taylor_stage();
        if (stage == "tune") return tune_stage();
        return report_stage();
    } catch (const std::runtime_error& e) {
        throw std::runtime_error("stage " + stage + " (config " +
                                 hash_hex(fnv1a64(stage_config(stage).dump())) + ") failed: " + e.what());
    }
}

std::vector<StageResult> Pipeline::run_all() {
    std::vector<StageResult> results;
    for (const char* stage : {"gen-corpus", "train", "toxify", "distill", "detox", "baseline", "eval",
                              "verify-taylor"}) {
        results.push_back(run_stage(stage));
    }
    return results;
}

} // namespace detoxlab
