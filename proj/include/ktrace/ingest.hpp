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
#ifndef KTRACE_INGEST_HPP_
#define KTRACE_INGEST_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <ktrace/core.hpp>

namespace ktrace {

/// Canonical CSV column order.
inline constexpr std::array<std::string_view, 21> kCanonicalColumns = {
    "student_id", "timestamp", "event_kind", "question_id", "kc_ids", "correct", "elapsed_time_s",
    "study_module", "teacher_group", "school", "course", "topic", "bundle", "part_area",
    "platform", "difficulty", "hint_count", "consumption_minutes", "age", "gender", "social_support"};

/// Reads canonical CSV into per-student, time-sorted sequences and derives lag
/// times. Equal timestamps keep file order.
Dataset load_events(std::istream& in, const DatasetManifest& manifest);
Dataset load_events(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Reads a manifest file and, when it names one, the KC graph next to it.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Loads a dataset together with the graph referenced by its manifest.
Dataset load_dataset(const std::filesystem::path& csv, const std::filesystem::path& manifest_path);

/// Graph file: {"level": "kc"|"question", "edges": [[pre, post], ...]} or
/// {"level": "kc", "ontology": {child: parent, ...}}. Ids are interned into `names`.
KCGraph load_graph(const Json& j, Interners& names);
Json graph_to_json(const KCGraph& graph, const Interners& names);

/// Writes canonical CSV (header plus one row per event, student by student).
void write_events(std::ostream& out, const Dataset& dataset);

/// Removes students with fewer than `min_responses` question responses,
/// together with all their other events.
Dataset filter_students(Dataset dataset, std::size_t min_responses = 10);

struct SquashResult {
    Dataset dataset;
    // artificial KC name -> sorted original KC names
    std::map<std::string, std::vector<std::string>> mapping;

    Json mapping_json() const;
};

/// Replaces every distinct KC set with a single artificial KC. The KC graph,
/// if KC-level, is lifted onto the artificial ids.
SquashResult squash_multi_kc(Dataset dataset);

struct FoldAssignment {
    int k = 0;
    std::map<std::string, int> fold_of;

    int fold(const std::string& student) const;
    std::vector<std::size_t> test_students(const Dataset& d, int fold) const;
    std::vector<std::size_t> train_students(const Dataset& d, int fold) const;

    Json to_json() const;
    static FoldAssignment from_json(const Json& j);
};

/// Seeded shuffle of the (name-sorted) students followed by round-robin
/// assignment, so the result does not depend on file order.
FoldAssignment split_folds(const Dataset& dataset, int k = 5, std::uint64_t seed = 0);

/// Fills lag_s on question responses: receipt time minus completion time of
/// the previous question. Negative values are clamped to zero; returns how
/// many were clamped.
std::size_t derive_lag_times(std::span<InteractionEvent> events);

}// namespace ktrace

#endif// KTRACE_INGEST_HPP_
