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
#ifndef KTRACE_FEATURES_HPP_
#define KTRACE_FEATURES_HPP_

#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <ktrace/core.hpp>
#include <ktrace/state.hpp>

namespace ktrace {

enum class FamilyKind : std::uint8_t {
    Bias,
    StudentOneHot,
    QuestionOneHot,
    KCOneHot,
    Counts,
    TWCounts,
    ElapsedTime,
    LagTime,
    DateTime,
    StudyModuleOneHot,
    StudyModuleCounts,
    ContextOneHot,
    PartAreaCounts,
    PrereqIDs,
    PrereqCounts,
    PostreqIDs,
    PostreqCounts,
    VideoWatchedCounts,
    VideoSkippedCounts,
    VideoWatchedTime,
    ReadingCounts,
    ReadingTime,
    HintCounts,
    HintTime,
    SmoothedAvgCorrect,
    ResponsePattern,
};

enum class CountScope : std::uint8_t { Total, KC, Question };
enum class TimeOf : std::uint8_t { Current, Prior };
enum class DatePart : std::uint8_t { Month, Week, Day, Hour };

/// One feature family. `arg` selects the scope/variant for parameterised
/// kinds: CountScope for Counts/TWCounts, TimeOf for ElapsedTime/LagTime,
/// DatePart for DateTime and ContextField for ContextOneHot.
struct FeatureFamily {
    FamilyKind kind = FamilyKind::Bias;
    std::uint8_t arg = 0;

    static constexpr FeatureFamily of(FamilyKind k) { return {k, 0}; }
    static constexpr FeatureFamily counts(CountScope s) { return {FamilyKind::Counts, static_cast<std::uint8_t>(s)}; }
    static constexpr FeatureFamily tw_counts(CountScope s) {
        return {FamilyKind::TWCounts, static_cast<std::uint8_t>(s)};
    }
    static constexpr FeatureFamily elapsed(TimeOf t) { return {FamilyKind::ElapsedTime, static_cast<std::uint8_t>(t)}; }
    static constexpr FeatureFamily lag(TimeOf t) { return {FamilyKind::LagTime, static_cast<std::uint8_t>(t)}; }
    static constexpr FeatureFamily datetime(DatePart p) { return {FamilyKind::DateTime, static_cast<std::uint8_t>(p)}; }
    static constexpr FeatureFamily context(ContextField f) {
        return {FamilyKind::ContextOneHot, static_cast<std::uint8_t>(f)};
    }

    friend auto operator<=>(const FeatureFamily&, const FeatureFamily&) = default;
};

std::string to_string(FeatureFamily family);
/// Parses names such as "bias", "counts:kc", "tw_counts:total", "lag:current", "context:topic".
FeatureFamily parse_family(std::string_view text);
/// Every family, each parameterisation listed once.
std::vector<FeatureFamily> all_families();

/// True when the manifest provides the data the family needs.
bool permitted(FeatureFamily family, const DatasetManifest& manifest);

inline constexpr double kInfiniteWindow = std::numeric_limits<double>::infinity();

struct Recipe {
    std::vector<FeatureFamily> families;
    int pattern_length = 10;
    int smoothing = 5;
    // Time windows in days; strictly increasing and ending with infinity.
    std::vector<double> window_days = {1.0 / 24.0, 1.0, 7.0, 30.0, kInfiniteWindow};

    bool contains(FeatureFamily family) const;
    void add(FeatureFamily family);
    void validate() const;

    Json to_json() const;
    static Recipe from_json(const Json& j);
};

/// Maps the ids of one categorical field to dense slots.
class CategoryIndex {
  public:
    CategoryIndex() = default;
    /// Slot i holds ids[i]; ids must be unique.
    explicit CategoryIndex(std::vector<Id> ids);

    std::optional<std::uint32_t> slot(Id id) const {
        if (id >= slots_.size() || slots_[id] < 0)
            return std::nullopt;
        return static_cast<std::uint32_t>(slots_[id]);
    }
    std::uint32_t size() const { return static_cast<std::uint32_t>(ids_.size()); }
    const std::vector<Id>& ids() const { return ids_; }

  private:
    std::vector<Id> ids_;
    std::vector<std::int32_t> slots_;
};

struct FeatureBlock {
    FeatureFamily family;
    std::uint32_t offset = 0;
    std::uint32_t size = 0;
};

// Fixed block geometry.
inline constexpr std::uint32_t kElapsedCap = 300;
inline constexpr std::uint32_t kElapsedBlock = kElapsedCap + 2;// 301 bins + scaled value
inline constexpr std::uint32_t kLagCategories = 150;
inline constexpr std::uint32_t kLagBlock = kLagCategories + 2;// categories + scaled value + no-lag flag
inline constexpr std::uint32_t kMaxPatternLength = 20;

struct ElapsedBin {
    std::uint32_t bin;
    double scaled;
};
/// Integer-second category capped at 300, plus log(1 + seconds).
ElapsedBin elapsed_bins(double seconds);

struct LagBin {
    std::uint32_t index;  // position in the category list
    std::uint32_t minutes;// the category value
    double scaled;
};
/// Rounds to whole minutes and maps to the largest listed category not
/// above it: {0,1,2,3,4,5,10,20,...,1440}.
LagBin lag_bins(double minutes);
/// The 150 lag categories.
const std::vector<std::uint32_t>& lag_categories();

/// (c + eta * rbar) / (a + eta).
double smoothed_avg_correct(double correct, double attempts, double rbar, int eta = 5);

/// One-hot block of size 2^n over the last n responses (most recent in the
/// least significant bit); all-zero with fewer than n responses.
SparseVector pattern_block(std::uint64_t recent_bits, std::uint32_t recent_count, std::uint32_t n = 10);

enum class GraphDirection : std::uint8_t { Pre, Post };
enum class GraphVariant : std::uint8_t { IDs, Counts };

/// Correct/attempt counts of a graph node for a student. Rollup graphs sum
/// the node's own counts with those of its children.
CountPair graph_node_counts(const KCGraph& graph, Id node, const StudentState& state);

/// Pre/post-requisite nodes of the question described by `next`.
std::vector<Id> related_nodes(const KCGraph& graph, const InteractionEvent& next, GraphDirection direction);

/// Block-local prerequisite features; `nodes` maps graph nodes to slots.
/// IDs puts 1 at slot(p); Counts puts scale(correct) at 2*slot(p) and
/// scale(attempts) at 2*slot(p)+1.
SparseVector prereq_blocks(const KCGraph& graph, const CategoryIndex& nodes, const InteractionEvent& next,
                           const StudentState& state, GraphVariant variant, GraphDirection direction);

/// UTC calendar parts of a timestamp: month 1-12, ISO week 1-53,
/// ISO weekday 1-7 (Monday = 1), hour 0-23.
struct CalendarParts {
    unsigned month;
    unsigned iso_week;
    unsigned weekday;
    unsigned hour;
};
CalendarParts calendar_parts(std::int64_t timestamp);

/// Fitted vocabularies and block layout of a recipe.
class Encoder {
  public:
    /// Builds vocabularies from the events of `train_students` (indices into
    /// dataset.students) only. Throws ConfigError when the manifest does not
    /// support a family of the recipe.
    static Encoder fit(const Dataset& dataset, std::span<const std::size_t> train_students, const Recipe& recipe);

    /// Features for predicting `next` from the history summarised by `state`.
    /// The prediction time is next.timestamp.
    SparseVector emit(const StudentState& state, const InteractionEvent& next) const;

    const Recipe& recipe() const { return recipe_; }
    std::uint32_t dimension() const { return dimension_; }
    const std::vector<FeatureBlock>& blocks() const { return blocks_; }
    std::optional<FeatureBlock> block(FeatureFamily family) const;
    double mean_correct() const { return mean_correct_; }
    /// Indices excluded from L2 regularisation (the bias).
    std::vector<std::uint32_t> unpenalized() const;

    const CategoryIndex& students() const { return students_; }
    const CategoryIndex& questions() const { return questions_; }
    const CategoryIndex& kcs() const { return kcs_; }
    const CategoryIndex& study_modules() const { return modules_; }
    const CategoryIndex& context(ContextField f) const { return context_[static_cast<std::size_t>(f)]; }
    const CategoryIndex& graph_nodes() const { return graph_nodes_; }

    Json to_json(const Interners& names) const;
    /// Ids are re-interned into `names`; `graph` must be the dataset's graph.
    static Encoder from_json(const Json& j, Interners& names, const std::optional<KCGraph>& graph);

    friend bool operator==(const Encoder& a, const Encoder& b);

  private:
    void layout();

    Recipe recipe_;
    CategoryIndex students_;
    CategoryIndex questions_;
    CategoryIndex kcs_;
    CategoryIndex modules_;
    std::array<CategoryIndex, kContextFieldCount> context_;
    CategoryIndex graph_nodes_;
    std::shared_ptr<const KCGraph> graph_;
    double mean_correct_ = 0.0;
    std::vector<FeatureBlock> blocks_;
    std::uint32_t dimension_ = 0;
    std::vector<double> window_seconds_;
};

/// Where a training/test example came from.
struct ExampleContext {
    std::uint32_t student_index = 0;// index into dataset.students
    std::uint32_t response_index = 0;// prior question responses of the student
    const InteractionEvent* event = nullptr;
};

/// Feature vectors and labels of question responses, in student order and
/// time order within each student.
struct ExampleSet {
    std::vector<SparseVector> phi;
    std::vector<std::uint8_t> labels;
    std::vector<ExampleContext> context;

    std::size_t size() const { return labels.size(); }
};

/// Replays the events of `students` through fresh states and emits one
/// example per question response. Parallel across students; output order
/// does not depend on `jobs`.
ExampleSet extract_examples(const Dataset& dataset, std::span<const std::size_t> students, const Encoder& encoder,
                            int jobs = 1);

}// namespace ktrace

#endif// KTRACE_FEATURES_HPP_
