// Copyright (c) 2026 detoxlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <string>

#include "detoxlab/corpus.hpp"
#include "detoxlab/optim.hpp"
#include "detoxlab/tensor.hpp"
#include "detoxlab/transformer.hpp"

namespace detoxlab {

// Decode-time knobs for the comparison methods. DExperts combination itself
// lives with the rest of the decoding algebra.
struct BaselineConfig {
    double ta_lambda = 0.04;
    double steer_eps_multiplier = -0.3; // decode epsilon = multiplier * 1e-3
    double dexperts_beta = 0.1;
    std::string preprompt = "short"; // short | long | custom
    std::string preprompt_custom;
};

// Decode-time epsilon unit: multipliers from the search grid scale this.
constexpr double kSteerEpsilonUnit = 1e-3;

// theta_base - lambda * tau, elementwise.
ParamVector task_arithmetic(const ParamVector& base, const ParamVector& tau, double lambda);

struct SteeringMatrix {
    Tensor w; // (D,D), embedding width
    std::map<std::string, std::string> provenance;
};

struct SteerTrainConfig {
    OptimizerConfig optimizer; // adamw with zero decay = Adam; lr 1e-2
    int epochs = 3;
    int batch_size = 32;
    double train_epsilon = 1e-3; // epsilon used while learning W
    std::uint64_t init_seed = 0;
    double init_var = 1e-3; // Gaussian init variance

    static SteerTrainConfig defaults();
};

// Learns W on toxic text with every base parameter frozen; the base model is
// bit-identical before and after. epochs = 0 returns the Gaussian init.
SteeringMatrix train_steer(const TransformerLM& base, const Corpus& toxic_corpus,
                           const SteerTrainConfig& cfg);

// Provider with perturbed input embeddings e' = e - eps * W e; the output
// projection keeps the original embeddings.
class SteeredLM : public LogitProvider {
public:
    SteeredLM(const TransformerLM& base, const SteeringMatrix& steer, double epsilon);

    int vocab_size() const override { return model_->vocab_size(); }
    int eos_id() const override { return model_->eos_id(); }
    int context_limit() const override { return model_->context_limit(); }

    // e' rows; tests check the closed forms directly.
    const Tensor& steered_embeddings() const;

protected:
    std::vector<double> logprobs_impl(const std::vector<int>& prefix) const override;

private:
    std::unique_ptr<TransformerLM> model_; // untied copy: steered input, original head
    Tensor steered_table_;
};

// Computes the steered table E' = E - eps * E W^T without building a model.
Tensor steer_embedding_table(const Tensor& embeddings, const Tensor& w, double epsilon);

enum class PrepromptKind { short_form, long_form, custom };
PrepromptKind preprompt_kind_from_string(const std::string& s);

// Returns preprompt ++ prompt. The short and long texts follow the published
// wording verbatim; they are applied at generation time only and stripped
// before scoring.
std::string apply_preprompt(const std::string& prompt, PrepromptKind kind,
                            const std::string& custom_text = "");
const std::string& preprompt_text(PrepromptKind kind);

} // namespace detoxlab
