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
#ifndef KTRACE_SPECIALIZE_HPP_
#define KTRACE_SPECIALIZE_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <ktrace/core.hpp>
#include <ktrace/features.hpp>
#include <ktrace/recipes.hpp>
#include <ktrace/regression.hpp>

namespace ktrace {

/// Category used by a by-feature partition.
struct PartitionField {
    enum class Kind : std::uint8_t { StudyModule, Question, KC, Context };
    Kind kind = Kind::StudyModule;
    ContextField context = ContextField::TeacherGroup;

    friend bool operator==(const PartitionField&, const PartitionField&) = default;
};

struct PartitionScheme {
    enum class Kind : std::uint8_t { ResponseIndex, ByFeature };

    Kind kind = Kind::ResponseIndex;
    std::vector<double> splitpoints = default_splitpoints();
    PartitionField field;

    static std::vector<double> default_splitpoints();
    static PartitionScheme response_index(std::vector<double> splits = default_splitpoints());
    static PartitionScheme by_feature(PartitionField field);

    /// "response-index", "response-index:0,10,inf", "feature:study_module",
    /// "feature:question", "feature:kc" or "feature:<context field>".
    static PartitionScheme parse(std::string_view text);
    std::string to_string() const;

    void validate() const;
    /// Partition key of one example: "0-10", "500-inf", or the category name.
    std::string key(const ExampleContext& example, const Interners& names) const;

    Json to_json() const { return to_string(); }
};

struct PartitionInfo {
    std::string key;
    std::size_t examples = 0;
    bool single_class = false;
    bool routed_to_fallback = false;// below the merge floor
};

/// One model per partition plus a fallback trained on every example.
class PartitionedModel {
  public:
    PartitionedModel() = default;
    PartitionedModel(PartitionScheme scheme, std::map<std::string, Model> models, Model fallback,
                     std::vector<PartitionInfo> info);

    /// The partition's model, or the fallback for unseen/merged keys.
    const Model& route(const std::string& key) const;
    double predict_routed(const SparseVector& phi, const ExampleContext& example, const Interners& names) const;

    const PartitionScheme& scheme() const { return scheme_; }
    const std::map<std::string, Model>& models() const { return models_; }
    const Model& fallback() const { return fallback_; }
    const std::vector<PartitionInfo>& info() const { return info_; }

    Json to_json() const;
    static PartitionedModel from_json(const Json& j);

  private:
    PartitionScheme scheme_;
    std::map<std::string, Model> models_;
    Model fallback_;
    std::vector<PartitionInfo> info_;
};

inline constexpr std::size_t kDefaultMergeFloor = 50;

/// Trains the fallback and one model per partition holding at least
/// `merge_floor` examples; all share `encoder`.
PartitionedModel fit_partitioned(const Encoder& encoder, const Interners& names, const ExampleSet& train,
                                 const PartitionScheme& scheme, const TrainConfig& config,
                                 std::size_t merge_floor = kDefaultMergeFloor);

/// A plain or partitioned model over one named recipe.
struct BaseSpec {
    ModelName model = ModelName::BestLR;
    std::vector<FeatureFamily> extras;
    std::optional<PartitionScheme> partition;

    /// "<model>[|family...][@scheme]", e.g. "best-lr@response-index" or "best-lr|prereq_counts".
    static BaseSpec parse(std::string_view text);
    std::string to_string() const;
};

/// A fitted base: its encoder and either a plain or a partitioned model.
class BasePredictor {
  public:
    BasePredictor(BaseSpec spec, Encoder encoder, Model model, std::optional<PartitionedModel> partitioned);

    /// Examples of `students` under this base's encoder.
    ExampleSet examples(const Dataset& dataset, std::span<const std::size_t> students, int jobs = 1) const;
    std::vector<double> predict(const Dataset& dataset, const ExampleSet& examples) const;
    std::vector<double> predict(const Dataset& dataset, std::span<const std::size_t> students, int jobs = 1) const;

    const BaseSpec& spec() const { return spec_; }
    const Encoder& encoder() const { return encoder_; }
    /// The plain model, or the fallback of a partitioned base.
    const Model& model() const { return model_; }
    const std::optional<PartitionedModel>& partitioned() const { return partitioned_; }

  private:
    BaseSpec spec_;
    Encoder encoder_;
    Model model_;
    std::optional<PartitionedModel> partitioned_;
};

struct BaseFitOptions {
    TrainConfig train;
    std::size_t merge_floor = kDefaultMergeFloor;
    std::optional<std::vector<FeatureFamily>> augmented_override;
    int jobs = 1;
};

/// Resolves the spec's recipe, fits an encoder on `students` and trains.
BasePredictor fit_base(const Dataset& dataset, std::span<const std::size_t> students, const BaseSpec& spec,
                       const BaseFitOptions& options);

}// namespace ktrace

#endif// KTRACE_SPECIALIZE_HPP_
