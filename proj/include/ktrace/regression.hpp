/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/
#ifndef KTRACE_REGRESSION_HPP_
#define KTRACE_REGRESSION_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <ktrace/core.hpp>
#include <ktrace/features.hpp>

namespace ktrace {

/// Raised when the training loss stops being finite.
class TrainingDivergence : public Error {
  public:
    using Error::Error;
};

/// Logistic function, strictly inside (0, 1) for every finite input.
double sigmoid(double z);

/// -log p(y | z) for a label y and logit z, without forming p.
double log_loss_from_logit(double z, bool y);

struct TrainConfig {
    int max_epochs = 2000;
    double tolerance = 1e-7;// relative NLL improvement
    double l2 = 1e-6;
    std::uint64_t seed = 0;
    int jobs = 1;// not part of the result
    std::optional<std::vector<double>> initial_weights;

    void validate() const;
    Json to_json() const;
    static TrainConfig from_json(const Json& j);
};

struct TrainMetadata {
    std::uint64_t seed = 0;
    int epochs = 0;
    int max_epochs = 0;
    double l2 = 0.0;
    double tolerance = 0.0;
    double final_nll = 0.0;
    double last_step = 0.0;
    bool converged = false;
    std::size_t examples = 0;

    Json to_json() const;
    static TrainMetadata from_json(const Json& j);
};

struct LossAndGradient {
    double nll = 0.0;
    std::vector<double> gradient;
};

/// Penalised negative log-likelihood and its gradient over a batch.
/// Indices in `unpenalized` carry no L2 term.
LossAndGradient nll_and_gradient(std::span<const SparseVector> phi, std::span<const std::uint8_t> labels,
                                 std::span<const double> weights, double l2,
                                 std::span<const std::uint32_t> unpenalized = {}, int jobs = 1);

/// Penalised negative log-likelihood only.
double penalized_nll(std::span<const SparseVector> phi, std::span<const std::uint8_t> labels,
                     std::span<const double> weights, double l2, std::span<const std::uint32_t> unpenalized = {},
                     int jobs = 1);

struct FitResult {
    std::vector<double> weights;
    TrainMetadata metadata;
};

/// Full-batch diagonally preconditioned gradient descent with step halving.
/// Deterministic for fixed inputs regardless of config.jobs.
FitResult fit_logistic(std::span<const SparseVector> phi, std::span<const std::uint8_t> labels,
                       std::uint32_t dimension, std::span<const std::uint32_t> unpenalized,
                       const TrainConfig& config);

/// Weight vector together with the recipe and encoder it was trained for.
class Model {
  public:
    Model() = default;
    Model(Recipe recipe, std::string encoder_digest, std::vector<double> weights, TrainMetadata metadata);

    double logit(const SparseVector& phi) const;
    /// sigmoid(w . phi); throws std::out_of_range on a dimension mismatch.
    double predict_proba(const SparseVector& phi) const { return sigmoid(logit(phi)); }

    const Recipe& recipe() const { return recipe_; }
    const std::string& encoder_digest() const { return encoder_digest_; }
    const std::vector<double>& weights() const { return weights_; }
    const TrainMetadata& metadata() const { return metadata_; }
    std::size_t dimension() const { return weights_.size(); }

    Json to_json() const;
    static Model from_json(const Json& j);

    friend bool operator==(const Model& a, const Model& b);

  private:
    Recipe recipe_;
    std::string encoder_digest_;
    std::vector<double> weights_;
    TrainMetadata metadata_;
};

/// Digest of an encoder's serialized form; ties a model to its encoder.
std::string encoder_digest(const Encoder& encoder, const Interners& names);

/// Fits a model on pre-extracted examples of `encoder`.
Model train_model(const Encoder& encoder, const Interners& names, const ExampleSet& examples,
                  const TrainConfig& config);

}// namespace ktrace

#endif// KTRACE_REGRESSION_HPP_
