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
#ifndef KTRACE_EVAL_HPP_
#define KTRACE_EVAL_HPP_

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <ktrace/combine.hpp>
#include <ktrace/ingest.hpp>
#include <ktrace/specialize.hpp>

namespace ktrace {

/// A metric is undefined for the given labels (e.g. AUC with one class).
class UndefinedMetric : public ArgumentError {
  public:
    using ArgumentError::ArgumentError;
};

/// Fraction of examples where (p >= threshold) equals the label.
double accuracy(std::span<const double> probs, std::span<const std::uint8_t> labels, double threshold = 0.5);

/// Exact rank AUC; tied scores count one half.
double auc(std::span<const double> probs, std::span<const std::uint8_t> labels);

struct RocPoint {
    double fpr;
    double tpr;
};

/// (0,0), one point per distinct score in decreasing order, ending at (1,1).
std::vector<RocPoint> roc_curve(std::span<const double> probs, std::span<const std::uint8_t> labels);
double trapezoid_area(std::span<const RocPoint> curve);

struct FoldMetrics {
    int fold = 0;
    std::size_t train_students = 0;
    std::size_t test_students = 0;
    std::size_t responses = 0;
    double accuracy = 0.0;
    std::optional<double> auc;
    Json details = Json::object();
};

struct BucketMetrics {
    std::string key;
    std::size_t responses = 0;
    double accuracy = 0.0;
    std::optional<double> auc;
};

struct MetricsReport {
    Json spec = Json::object();
    std::vector<FoldMetrics> folds;
    double mean_accuracy = 0.0;
    double var_accuracy = 0.0;
    std::optional<double> mean_auc;
    std::optional<double> var_auc;
    std::vector<BucketMetrics> buckets;// pooled over folds, keyed by response index
    std::vector<RocPoint> roc;          // pooled over folds

    Json to_json() const;
};

/// What cross_validate trains per fold: one base, or a stacked combination.
struct ModelSpec {
    BaseSpec base;
    std::vector<BaseSpec> combine;// non-empty: stacked model over these bases
    bool select_subset = false;    // choose the combined subset on the first fold
    BaseFitOptions fit;
    CombineConfig combine_config;

    Json to_json() const;
};

/// Observation points for leakage checks and artifact export.
struct CVHooks {
    std::function<void(int fold, std::span<const std::size_t> train_students)> on_train_students;
    std::function<void(int fold, const ExampleSet& test, std::span<const double> probs)> on_predictions;
    std::function<void(int fold, const BasePredictor& base)> on_base;
    std::function<void(int fold, const CombinedModel& combined)> on_combined;
};

/// Student-level cross-validation. Folds run in order; the result does not
/// depend on spec.fit.jobs.
MetricsReport cross_validate(const Dataset& dataset, const FoldAssignment& folds, const ModelSpec& spec,
                             const CVHooks& hooks = {});
MetricsReport cross_validate(const Dataset& dataset, const ModelSpec& spec, int k, std::uint64_t seed,
                             const CVHooks& hooks = {});

/// Population mean and variance.
std::pair<double, double> mean_and_variance(std::span<const double> values);

struct DatasetStats {
    std::size_t students = 0;
    std::size_t responses = 0;
    std::size_t events = 0;
    double correctness = 0.0;
    std::map<std::size_t, std::size_t> responses_per_student;// responses -> students
    std::size_t successor_pairs = 0;
    double next_question_predictability = 0.0;
    double next_kc_predictability = 0.0;

    Json to_json() const;
};

/// Response histogram, correctness and modal-successor predictability.
DatasetStats dataset_stats(const Dataset& dataset);

}// namespace ktrace

#endif// KTRACE_EVAL_HPP_
