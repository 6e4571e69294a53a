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
#ifndef KTRACE_COMBINE_HPP_
#define KTRACE_COMBINE_HPP_

#include <string>
#include <vector>

#include <ktrace/specialize.hpp>

namespace ktrace {

/// A base model could not be trained while building a combination.
class CombinationError : public Error {
  public:
    using Error::Error;
};

struct CombineConfig {
    bool logit_inputs = false;
    double holdout_fraction = 0.1;
    std::uint64_t seed = 0;
};

/// Meta-model input for one example: [1, x_1, ..., x_m], x_i the base
/// probability or its logit.
SparseVector meta_features(std::span<const double> base_probs, bool logit_inputs);

/// Splits students into (fit, holdout) by a seeded shuffle of their names.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(const Dataset& dataset,
                                                                           std::span<const std::size_t> students,
                                                                           double fraction, std::uint64_t seed);

/// Fits a logistic meta model on per-base probability columns.
Model fit_meta(const std::vector<std::vector<double>>& base_probs, std::span<const std::uint8_t> labels,
               bool logit_inputs, const TrainConfig& config);

/// Stacked bases and the meta model over their outputs.
class CombinedModel {
  public:
    CombinedModel(std::vector<BasePredictor> bases, Model meta, CombineConfig config,
                  std::vector<std::string> holdout_students);

    double combine(std::span<const double> base_probs) const;
    /// Combined predictions for the question responses of `students`.
    std::vector<double> predict(const Dataset& dataset, std::span<const std::size_t> students, int jobs = 1) const;
    /// Per-base prediction columns for `students`.
    std::vector<std::vector<double>> base_predictions(const Dataset& dataset, std::span<const std::size_t> students,
                                                      int jobs = 1) const;

    const std::vector<BasePredictor>& bases() const { return bases_; }
    const Model& meta() const { return meta_; }
    const CombineConfig& config() const { return config_; }
    /// Students whose responses trained the meta model.
    const std::vector<std::string>& holdout_students() const { return holdout_; }

    Json manifest_json() const;

  private:
    std::vector<BasePredictor> bases_;
    Model meta_;
    CombineConfig config_;
    std::vector<std::string> holdout_;
};

/// Fits bases on the non-holdout training students, the meta model on the
/// holdout, then refits the bases on all of `students`.
CombinedModel fit_combined(const Dataset& dataset, std::span<const std::size_t> students,
                           const std::vector<BaseSpec>& specs, const BaseFitOptions& options,
                           const CombineConfig& config);

struct SubsetScore {
    std::vector<std::size_t> members;// indices into the candidate list
    double auc = 0.0;
};

struct Selection {
    std::vector<std::size_t> chosen;
    std::vector<SubsetScore> scores;// enumeration order

    Json to_json(const std::vector<BaseSpec>& candidates) const;
};

/// Exhaustive subset search on one split: each candidate is fitted once on
/// the non-holdout part of `train`, every non-empty subset gets a meta model
/// on the holdout and is scored by AUC on `validation`. Ties favour fewer
/// bases, then enumeration order.
Selection select_bases(const Dataset& dataset, std::span<const std::size_t> train,
                       std::span<const std::size_t> validation, const std::vector<BaseSpec>& candidates,
                       const BaseFitOptions& options, const CombineConfig& config);

}// namespace ktrace

#endif// KTRACE_COMBINE_HPP_
