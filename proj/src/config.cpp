// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#include "detoxlab/config.hpp"

#include <fstream>
#include <stdexcept>

#include "detoxlab/hashing.hpp"

namespace detoxlab {

namespace {

// Schema tree: every accepted key with a one-line description. Unknown keys
// are hard errors - silent typos corrupt experiments.
const nlohmann::json& schema() {
    static const nlohmann::json s = nlohmann::json::parse(R"JSON({
  "corpus": {
    "seed": "corpus generation seed",
    "pretrain_sentences": "sentences in the pretraining mix",
    "toxic_sentences": "sentences in the toxic-only fine-tuning corpus (seen domains)",
    "heldout_sentences": "held-out sentences split into validation/test pools",
    "toxic_fraction": "toxic share of the pretraining mix, in [0,1]",
    "prompt_tokens": "words kept when cutting evaluation prompts",
    "id_prompts": "prompts per seen-domain set (validation and test each)",
    "ood_prompts": "prompts per unseen-domain set (validation and test each)"
  },
  "base_model": {
    "context": "context length", "layers": "transformer layers", "heads": "attention heads",
    "d_model": "embedding width", "tied_embeddings": "share input embedding with output head",
    "init_std": "Gaussian init scale", "init_seed": "weight init seed",
    "train": {
      "optimizer": "sgd | adamw", "learning_rate": "step size", "weight_decay": "decoupled decay",
      "epochs": "training epochs", "batch_size": "blocks per step", "seed": "shuffle seed"
    }
  },
  "reference_model": {
    "context": "context length", "layers": "transformer layers", "heads": "attention heads",
    "d_model": "embedding width", "tied_embeddings": "share input embedding with output head",
    "init_std": "Gaussian init scale", "init_seed": "weight init seed",
    "train": {
      "optimizer": "sgd | adamw", "learning_rate": "step size", "weight_decay": "decoupled decay",
      "epochs": "training epochs", "batch_size": "blocks per step", "seed": "shuffle seed"
    }
  },
  "transfer_model": {
    "context": "context length", "layers": "transformer layers", "heads": "attention heads",
    "d_model": "embedding width", "tied_embeddings": "share input embedding with output head",
    "init_std": "Gaussian init scale", "init_seed": "weight init seed",
    "train": {
      "optimizer": "sgd | adamw", "learning_rate": "step size", "weight_decay": "decoupled decay",
      "epochs": "training epochs", "batch_size": "blocks per step", "seed": "shuffle seed"
    }
  },
  "toxic_finetune": {
    "optimizer": "sgd | adamw", "learning_rate": "step size",
    "epochs": "fine-tuning epochs", "batch_size": "blocks per step", "seed": "shuffle seed"
  },
  "distill": {
    "alpha": "adaptive plausibility constraint, in [0,1]",
    "max_length": "max tokens per distilled sequence",
    "num_sequences": "distilled sequences per run",
    "prompt": "distillation prompt; the literal string \"eos\""
  },
  "detox": {
    "optimizer": "sgd | adamw", "learning_rate_presets": "named presets, high first",
    "batch_size": "blocks per step", "steps": "fine-tuning steps (applies to every target)"
  },
  "sampler": {
    "nucleus_p": "nucleus mass for evaluation sampling",
    "temperature": "softmax temperature",
    "max_new_tokens": "continuation length cap",
    "num_continuations": "continuations per prompt"
  },
  "scorer": {
    "base_weight": "lexicon hit weight w in score = 1-(1-w)^h",
    "threshold": "toxicity decision threshold"
  },
  "baselines": {
    "ta_lambda": "task-arithmetic scale",
    "dexperts_beta": "dexperts strength",
    "steer_eps_multiplier": "decode epsilon = multiplier * 1e-3",
    "preprompt": "short | long | custom",
    "preprompt_custom": "custom preprompt text",
    "steer": {
      "learning_rate": "steering-matrix step size", "epochs": "steer training epochs",
      "batch_size": "blocks per step", "train_epsilon": "epsilon used while learning W",
      "init_seed": "W init seed", "init_var": "Gaussian init variance for W"
    }
  },
  "tune": {
    "steps_grid": "fine-tuning steps searched",
    "lr_presets": "learning-rate presets searched for unidetox/samples",
    "ta_lambda_grid": "task-arithmetic search grid",
    "dexperts_beta_grid": "dexperts search grid",
    "steer_eps_multiplier_grid": "steer epsilon multiplier grid",
    "ppl_ceiling_factor": "baseline perplexity ceiling factor over the unidetox maximum"
  },
  "seeds": "run seeds for headline numbers (five by default)",
  "eval_methods": "methods evaluated by the eval stage"
})JSON");
    return s;
}

void validate_node(const nlohmann::json& cfg, const nlohmann::json& node, const std::string& path) {
    if (!cfg.is_object()) return;
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        const std::string here = path.empty() ? it.key() : path + "." + it.key();
        if (!node.is_object() || !node.contains(it.key())) {
            throw std::invalid_argument("config: unknown key '" + here + "'");
        }
        if (it.value().is_object()) {
            if (!node.at(it.key()).is_object()) {
                throw std::invalid_argument("config: '" + here + "' does not take an object");
            }
            validate_node(it.value(), node.at(it.key()), here);
        }
    }
}

nlohmann::json train_json(const TrainConfig& t) {
    return {{"optimizer", to_string(t.optimizer.kind)}, {"learning_rate", t.optimizer.learning_rate},
            {"weight_decay", t.optimizer.weight_decay}, {"epochs", t.epochs},
            {"batch_size", t.batch_size},               {"seed", t.seed}};
}

TrainConfig train_from_json(const nlohmann::json& j, const TrainConfig& defaults) {
    TrainConfig t = defaults;
    if (j.contains("optimizer")) t.optimizer.kind = optimizer_kind_from_string(j["optimizer"].get<std::string>());
    t.optimizer.learning_rate = j.value("learning_rate", t.optimizer.learning_rate);
    t.optimizer.weight_decay = j.value("weight_decay", t.optimizer.weight_decay);
    t.epochs = j.value("epochs", t.epochs);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.seed = j.value("seed", t.seed);
    return t;
}

nlohmann::json model_json(const ModelSpec& m) {
    return {{"context", m.dims.context},
            {"layers", m.dims.layers},
            {"heads", m.dims.heads},
            {"d_model", m.dims.d_model},
            {"tied_embeddings", m.dims.tied_embeddings},
            {"init_std", m.dims.init_std},
            {"init_seed", m.init_seed},
            {"train", train_json(m.train)}};
}

ModelSpec model_from_json(const nlohmann::json& j, const ModelSpec& defaults) {
    ModelSpec m = defaults;
    m.dims.context = j.value("context", m.dims.context);
    m.dims.layers = j.value("layers", m.dims.layers);
    m.dims.heads = j.value("heads", m.dims.heads);
    m.dims.d_model = j.value("d_model", m.dims.d_model);
    m.dims.tied_embeddings = j.value("tied_embeddings", m.dims.tied_embeddings);
    m.dims.init_std = j.value("init_std", m.dims.init_std);
    m.init_seed = j.value("init_seed", m.init_seed);
    if (j.contains("train")) m.train = train_from_json(j["train"], m.train);
    return m;
}

} // namespace

void validate_config_keys(const nlohmann::json& config) {
    if (!config.is_object()) throw std::invalid_argument("config: top level must be an object");
    validate_node(config, schema(), "");
}

RunConfig RunConfig::defaults() {
    RunConfig c;

    c.base_model.dims = TransformerConfig{.vocab = 0, .context = 48, .layers = 2, .heads = 2, .d_model = 48};
    c.base_model.init_seed = 101;
    c.base_model.train.optimizer.kind = OptimizerKind::adamw;
    c.base_model.train.optimizer.learning_rate = 4e-3;
    c.base_model.train.epochs = 6;
    c.base_model.train.batch_size = 8;
    c.base_model.train.seed = 102;

    c.reference_model = c.base_model;
    c.reference_model.dims.d_model = 64;
    c.reference_model.dims.heads = 4;
    c.reference_model.init_seed = 201;
    c.reference_model.train.seed = 202;

    c.transfer_model = c.base_model;
    c.transfer_model.dims.d_model = 32;
    c.transfer_model.init_seed = 301;
    c.transfer_model.train.seed = 302;

    // Paper structure (3 epochs, batch 4); the step size is desk-rescaled.
    c.toxic_finetune = FineTuneConfig::toxic_defaults();
    c.toxic_finetune.optimizer.learning_rate = 3e-4;
    c.toxic_finetune.seed = 31;

    c.distill = ContrastiveConfig{}; // alpha .1, 256 tokens, 640 sequences, eos prompt

    c.detox.finetune = FineTuneConfig::detox_defaults();
    c.detox.finetune.steps = 480;
    c.detox.finetune.epochs = -1; // step-driven
    c.detox.learning_rate_presets = {"desk_high", "desk_low"};

    c.sampler = SamplerConfig{}; // p=.9, 20 tokens, 25 continuations

    c.steer_train = SteerTrainConfig::defaults();
    c.steer_train.init_seed = 401;

    c.tune.steps_grid = {1000, 2000, 3000, 4000, 5000, 6000, 7000, 8000, 9000, 10000};
    c.tune.lr_presets = {"desk_high", "desk_low"};
    for (int i = 1; i <= 20; ++i) c.tune.ta_lambda_grid.push_back(0.01 * i);
    for (int i = 1; i <= 20; ++i) c.tune.dexperts_beta_grid.push_back(0.1 * i);
    for (int i = 1; i <= 20; ++i) c.tune.steer_eps_multiplier_grid.push_back(-0.1 * i);
    c.tune.ppl_ceiling_factor = 1.10;

    c.seeds = {1, 2, 3, 4, 5};
    c.eval_methods = {"base",     "unidetox",        "samples",         "task_arithmetic", "dexperts",
                      "lm_steer", "preprompt_short", "preprompt_long",  "transfer"};
    return c;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["corpus"] = {{"seed", corpus.seed},
                   {"pretrain_sentences", corpus.pretrain_sentences},
                   {"toxic_sentences", corpus.toxic_sentences},
                   {"heldout_sentences", corpus.heldout_sentences},
                   {"toxic_fraction", corpus.toxic_fraction},
                   {"prompt_tokens", corpus.prompt_tokens},
                   {"id_prompts", corpus.id_prompts},
                   {"ood_prompts", corpus.ood_prompts}};
    j["base_model"] = model_json(base_model);
    j["reference_model"] = model_json(reference_model);
    j["transfer_model"] = model_json(transfer_model);
    j["toxic_finetune"] = {{"optimizer", to_string(toxic_finetune.optimizer.kind)},
                           {"learning_rate", toxic_finetune.optimizer.learning_rate},
                           {"epochs", toxic_finetune.epochs},
                           {"batch_size", toxic_finetune.batch_size},
                           {"seed", toxic_finetune.seed}};
    j["distill"] = {{"alpha", distill.alpha},
                    {"max_length", distill.max_length},
                    {"num_sequences", distill.num_sequences},
                    {"prompt", "eos"}};
    j["detox"] = {{"optimizer", to_string(detox.finetune.optimizer.kind)},
                  {"learning_rate_presets", detox.learning_rate_presets},
                  {"batch_size", detox.finetune.batch_size},
                  {"steps", detox.finetune.steps}};
    j["sampler"] = {{"nucleus_p", sampler.nucleus_p},
                    {"temperature", sampler.temperature},
                    {"max_new_tokens", sampler.max_new_tokens},
                    {"num_continuations", sampler.num_continuations}};
    j["scorer"] = {{"base_weight", scorer.base_weight}, {"threshold", scorer.threshold}};
    j["baselines"] = {{"ta_lambda", baselines.ta_lambda},
                      {"dexperts_beta", baselines.dexperts_beta},
                      {"steer_eps_multiplier", baselines.steer_eps_multiplier},
                      {"preprompt", baselines.preprompt},
                      {"preprompt_custom", baselines.preprompt_custom},
                      {"steer",
                       {{"learning_rate", steer_train.optimizer.learning_rate},
                        {"epochs", steer_train.epochs},
                        {"batch_size", steer_train.batch_size},
                        {"train_epsilon", steer_train.train_epsilon},
                        {"init_seed", steer_train.init_seed},
                        {"init_var", steer_train.init_var}}}};
    j["tune"] = {{"steps_grid", tune.steps_grid},
                 {"lr_presets", tune.lr_presets},
                 {"ta_lambda_grid", tune.ta_lambda_grid},
                 {"dexperts_beta_grid", tune.dexperts_beta_grid},
                 {"steer_eps_multiplier_grid", tune.steer_eps_multiplier_grid},
                 {"ppl_ceiling_factor", tune.ppl_ceiling_factor}};
    j["seeds"] = seeds;
    j["eval_methods"] = eval_methods;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    validate_config_keys(j);
    RunConfig c = defaults();
    if (j.contains("corpus")) {
        const auto& cj = j["corpus"];
        c.corpus.seed = cj.value("seed", c.corpus.seed);
        c.corpus.pretrain_sentences = cj.value("pretrain_sentences", c.corpus.pretrain_sentences);
        c.corpus.toxic_sentences = cj.value("toxic_sentences", c.corpus.toxic_sentences);
        c.corpus.heldout_sentences = cj.value("heldout_sentences", c.corpus.heldout_sentences);
        c.corpus.toxic_fraction = cj.value("toxic_fraction", c.corpus.toxic_fraction);
        c.corpus.prompt_tokens = cj.value("prompt_tokens", c.corpus.prompt_tokens);
        c.corpus.id_prompts = cj.value("id_prompts", c.corpus.id_prompts);
        c.corpus.ood_prompts = cj.value("ood_prompts", c.corpus.ood_prompts);
    }
    if (j.contains("base_model")) c.base_model = model_from_json(j["base_model"], c.base_model);
    if (j.contains("reference_model")) {
        c.reference_model = model_from_json(j["reference_model"], c.reference_model);
    }
    if (j.contains("transfer_model")) c.transfer_model = model_from_json(j["transfer_model"], c.transfer_model);
    if (j.contains("toxic_finetune")) {
        const auto& tj = j["toxic_finetune"];
        if (tj.contains("optimizer")) {
            c.toxic_finetune.optimizer.kind = optimizer_kind_from_string(tj["optimizer"].get<std::string>());
        }
        c.toxic_finetune.optimizer.learning_rate =
            tj.value("learning_rate", c.toxic_finetune.optimizer.learning_rate);
        c.toxic_finetune.epochs = tj.value("epochs", c.toxic_finetune.epochs);
        c.toxic_finetune.batch_size = tj.value("batch_size", c.toxic_finetune.batch_size);
        c.toxic_finetune.seed = tj.value("seed", c.toxic_finetune.seed);
    }
    if (j.contains("distill")) {
        const auto& dj = j["distill"];
        c.distill.alpha = dj.value("alpha", c.distill.alpha);
        c.distill.max_length = dj.value("max_length", c.distill.max_length);
        c.distill.num_sequences = dj.value("num_sequences", c.distill.num_sequences);
        if (dj.contains("prompt") && dj["prompt"].get<std::string>() != "eos") {
            throw std::invalid_argument("config: distill.prompt only supports \"eos\"");
        }
    }
    if (j.contains("detox")) {
        const auto& dj = j["detox"];
        if (dj.contains("optimizer")) {
            c.detox.finetune.optimizer.kind = optimizer_kind_from_string(dj["optimizer"].get<std::string>());
        }
        c.detox.finetune.batch_size = dj.value("batch_size", c.detox.finetune.batch_size);
        c.detox.finetune.steps = dj.value("steps", c.detox.finetune.steps);
        if (dj.contains("learning_rate_presets")) {
            c.detox.learning_rate_presets = dj["learning_rate_presets"].get<std::vector<std::string>>();
        }
    }
    if (j.contains("sampler")) {
        const auto& sj = j["sampler"];
        c.sampler.nucleus_p = sj.value("nucleus_p", c.sampler.nucleus_p);
        c.sampler.temperature = sj.value("temperature", c.sampler.temperature);
        c.sampler.max_new_tokens = sj.value("max_new_tokens", c.sampler.max_new_tokens);
        c.sampler.num_continuations = sj.value("num_continuations", c.sampler.num_continuations);
    }
    if (j.contains("scorer")) {
        c.scorer.base_weight = j["scorer"].value("base_weight", c.scorer.base_weight);
        c.scorer.threshold = j["scorer"].value("threshold", c.scorer.threshold);
    }
    if (j.contains("baselines")) {
        const auto& bj = j["baselines"];
        c.baselines.ta_lambda = bj.value("ta_lambda", c.baselines.ta_lambda);
        c.baselines.dexperts_beta = bj.value("dexperts_beta", c.baselines.dexperts_beta);
        c.baselines.steer_eps_multiplier = bj.value("steer_eps_multiplier", c.baselines.steer_eps_multiplier);
        c.baselines.preprompt = bj.value("preprompt", c.baselines.preprompt);
        c.baselines.preprompt_custom = bj.value("preprompt_custom", c.baselines.preprompt_custom);
        if (bj.contains("steer")) {
            const auto& sj = bj["steer"];
            c.steer_train.optimizer.learning_rate =
                sj.value("learning_rate", c.steer_train.optimizer.learning_rate);
            c.steer_train.epochs = sj.value("epochs", c.steer_train.epochs);
            c.steer_train.batch_size = sj.value("batch_size", c.steer_train.batch_size);
            c.steer_train.train_epsilon = sj.value("train_epsilon", c.steer_train.train_epsilon);
            c.steer_train.init_seed = sj.value("init_seed", c.steer_train.init_seed);
            c.steer_train.init_var = sj.value("init_var", c.steer_train.init_var);
        }
    }
    if (j.contains("tune")) {
        const auto& tj = j["tune"];
        if (tj.contains("steps_grid")) c.tune.steps_grid = tj["steps_grid"].get<std::vector<long>>();
        if (tj.contains("lr_presets")) c.tune.lr_presets = tj["lr_presets"].get<std::vector<std::string>>();
        if (tj.contains("ta_lambda_grid")) c.tune.ta_lambda_grid = tj["ta_lambda_grid"].get<std::vector<double>>();
        if (tj.contains("dexperts_beta_grid")) {
            c.tune.dexperts_beta_grid = tj["dexperts_beta_grid"].get<std::vector<double>>();
        }
        if (tj.contains("steer_eps_multiplier_grid")) {
            c.tune.steer_eps_multiplier_grid = tj["steer_eps_multiplier_grid"].get<std::vector<double>>();
        }
        c.tune.ppl_ceiling_factor = tj.value("ppl_ceiling_factor", c.tune.ppl_ceiling_factor);
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("eval_methods")) c.eval_methods = j["eval_methods"].get<std::vector<std::string>>();

    if (c.seeds.empty()) throw std::invalid_argument("config: seeds must be non-empty");
    if (c.corpus.toxic_fraction < 0.0 || c.corpus.toxic_fraction > 1.0) {
        throw std::invalid_argument("config: corpus.toxic_fraction must be in [0,1]");
    }
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("config: invalid JSON in " + path);
    return from_json(j);
}

std::string RunConfig::config_hash() const {
    return hash_hex(fnv1a64(to_json().dump()));
}

namespace {

void schema_lines(const nlohmann::json& node, const std::string& path, std::string& out) {
    for (auto it = node.begin(); it != node.end(); ++it) {
        const std::string here = path.empty() ? it.key() : path + "." + it.key();
        if (it.value().is_object()) {
            schema_lines(it.value(), here, out);
        } else {
            out += "- `" + here + "` - " + it.value().get<std::string>() + "\n";
        }
    }
}

} // namespace

std::string config_schema_markdown() {
    std::string out = "# Run configuration schema\n\n"
                      "Every accepted key, as enforced by the loader; unknown keys are errors.\n\n";
    schema_lines(schema(), "", out);
    return out;
}

} // namespace detoxlab
