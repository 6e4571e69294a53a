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
#ifndef KTRACE_CORE_HPP_
#define KTRACE_CORE_HPP_

#include <array>
#include <bitset>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace ktrace {

using Json = nlohmann::json;

// Errors -------------------------------------------------------------------

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument to a numeric or domain function.
class ArgumentError : public Error {
  public:
    using Error::Error;
};

/// Malformed input row; carries the 1-based line number.
class ParseError : public Error {
  public:
    ParseError(std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

/// Data that does not match the dataset manifest or event invariants.
class SchemaError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Events applied to a student state out of time order.
class SequencingError : public Error {
  public:
    using Error::Error;
};

// Identifiers ----------------------------------------------------------------

/// Dense per-dataset integer for an interned opaque id.
using Id = std::uint32_t;
inline constexpr Id kNoId = std::numeric_limits<Id>::max();

/// Maps opaque string ids to dense integers in order of first appearance.
class Vocabulary {
  public:
    Id intern(std::string_view name);
    std::optional<Id> find(std::string_view name) const;
    const std::string& name(Id id) const;
    std::size_t size() const { return names_.size(); }

  private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, Id> ids_;
};

// Events ---------------------------------------------------------------------

enum class EventKind : std::uint8_t { QuestionResponse, VideoWatch, VideoSkip, Reading, HintUse };

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

enum class ContextField : std::uint8_t {
    TeacherGroup,
    School,
    Course,
    Topic,
    Difficulty,
    Bundle,
    PartArea,
    Platform,
    Age,
    Gender,
    SocialSupport,
};
inline constexpr std::size_t kContextFieldCount = 11;

std::string_view to_string(ContextField field);
std::optional<ContextField> parse_context_field(std::string_view text);

struct InteractionEvent {
    Id student = kNoId;
    std::int64_t timestamp = 0;
    EventKind kind = EventKind::QuestionResponse;
    Id question = kNoId;
    std::vector<Id> kcs;// sorted, unique
    std::optional<bool> correct;
    std::optional<double> elapsed_s;
    Id study_module = kNoId;
    std::array<Id, kContextFieldCount> context = filled_context();
    std::optional<std::int32_t> hint_count;
    std::optional<double> consumption_minutes;
    // Derived at ingestion for question responses; empty means "no lag" (first response).
    std::optional<double> lag_s;

    bool is_question() const { return kind == EventKind::QuestionResponse; }
    Id context_value(ContextField f) const { return context[static_cast<std::size_t>(f)]; }

    static constexpr std::array<Id, kContextFieldCount> filled_context() {
        std::array<Id, kContextFieldCount> a{};
        for (auto& v : a)
            v = kNoId;
        return a;
    }
};

// Manifest -------------------------------------------------------------------

enum class Capability : std::uint8_t {
    ElapsedTime,
    LagTime,
    StudyModule,
    PrerequisiteGraph,
    KCHierarchy,
    Bundle,
    Videos,
    Reading,
    Hints,
    Personal,
    Platform,
    Difficulty,
    TeacherGroup,
    School,
    Course,
    Topic,
    PartArea,
};
inline constexpr std::size_t kCapabilityCount = 17;

std::string_view to_string(Capability cap);
std::optional<Capability> parse_capability(std::string_view text);

/// Capability needed for a context column to be present.
Capability capability_for(ContextField field);

struct DatasetManifest {
    std::string name;
    std::bitset<kCapabilityCount> capabilities;
    // Path of the KC graph file, relative to the manifest file.
    std::optional<std::string> kc_graph;

    bool has(Capability cap) const { return capabilities.test(static_cast<std::size_t>(cap)); }
    DatasetManifest& enable(Capability cap) {
        capabilities.set(static_cast<std::size_t>(cap));
        return *this;
    }

    Json to_json() const;
    static DatasetManifest from_json(const Json& j);
};

// KC graph -------------------------------------------------------------------

enum class GraphLevel : std::uint8_t { KC, Question };

/// Directed prerequisite relation (edge pre -> post) over KC or question ids.
///
/// A graph derived from an ontology tree is marked as a rollup graph: the
/// interaction count of a parent node is the sum over its leaves.
class KCGraph {
  public:
    KCGraph() = default;
    explicit KCGraph(GraphLevel level, bool rollup = false) : level_(level), rollup_(rollup) {}

    void add_edge(Id pre, Id post);

    GraphLevel level() const { return level_; }
    bool rollup() const { return rollup_; }

    std::span<const Id> prerequisites(Id node) const;
    std::span<const Id> postrequisites(Id node) const;
    std::vector<std::pair<Id, Id>> edges() const;
    /// All nodes touched by an edge, sorted.
    std::vector<Id> nodes() const;
    std::size_t edge_count() const;

    KCGraph reversed() const;

    /// Pseudo-prerequisite graph of an ontology: the parent of every leaf
    /// becomes its prerequisite. `parent_of` maps child -> parent.
    static KCGraph from_ontology(const std::vector<std::pair<Id, Id>>& parent_of);

  private:
    GraphLevel level_ = GraphLevel::KC;
    bool rollup_ = false;
    std::unordered_map<Id, std::vector<Id>> pre_;
    std::unordered_map<Id, std::vector<Id>> post_;
};

// Sparse vectors -------------------------------------------------------------

struct SparseEntry {
    std::uint32_t index;
    double value;

    friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Sorted (index, value) pairs with unique indices and no explicit zeros.
class SparseVector {
  public:
    SparseVector() = default;

    /// Sorts, drops zeros, and rejects duplicate indices.
    static SparseVector from_entries(std::vector<SparseEntry> entries);

    /// Appends an entry; `index` must exceed the last index. Zero values are skipped.
    void push_back(std::uint32_t index, double value);

    std::span<const SparseEntry> entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    /// One past the largest index, 0 when empty.
    std::size_t extent() const { return entries_.empty() ? 0 : entries_.back().index + std::size_t{1}; }
    double value_at(std::uint32_t index) const;

    Json to_json() const;
    static SparseVector from_json(const Json& j);

    friend bool operator==(const SparseVector&, const SparseVector&) = default;

  private:
    std::vector<SparseEntry> entries_;
};

/// log(1 + x) for x >= 0.
double scale(double x);

/// Sum of value * w[index]; throws std::out_of_range for an index outside w.
double dot(const SparseVector& v, std::span<const double> w);

/// 64-bit FNV-1a hash, rendered as 16 hex digits by hex_digest.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex_digest(std::string_view bytes);

// Dataset --------------------------------------------------------------------

struct Interners {
    Vocabulary students;
    Vocabulary questions;
    Vocabulary kcs;
    Vocabulary study_modules;
    std::array<Vocabulary, kContextFieldCount> context;

    Vocabulary& of(ContextField f) { return context[static_cast<std::size_t>(f)]; }
    const Vocabulary& of(ContextField f) const { return context[static_cast<std::size_t>(f)]; }
};

struct StudentLog {
    Id student = kNoId;
    std::vector<InteractionEvent> events;

    std::size_t response_count() const;
};

struct DataQuality {
    std::size_t clamped_lags = 0;

    std::size_t warnings() const { return clamped_lags; }
};

struct Dataset {
    DatasetManifest manifest;
    Interners names;
    std::vector<StudentLog> students;
    std::optional<KCGraph> graph;
    DataQuality quality;

    std::size_t response_count() const;
    std::size_t event_count() const;
};

}// namespace ktrace

#endif// KTRACE_CORE_HPP_
