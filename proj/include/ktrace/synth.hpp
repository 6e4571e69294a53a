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
#ifndef KTRACE_SYNTH_HPP_
#define KTRACE_SYNTH_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <ktrace/core.hpp>

namespace ktrace {

struct GeneratorConfig {
    std::uint64_t seed = 7;
    std::size_t students = 500;
    std::size_t questions = 50;
    std::size_t kcs = 10;
    // 0: every student answers every question once, in random order.
    std::size_t responses_per_student = 0;
    double ability_sd = 1.0;
    double difficulty_sd = 1.0;
    // Logit boost m * min(streak, window) / window after a run of correct answers.
    double momentum = 0.0;
    std::uint32_t momentum_window = 10;
    // From this response index on, questions use a second, independent difficulty draw.
    std::optional<std::uint32_t> regime_change_step;
    // Random KC tree; mastering the parent KC adds `transfer_bonus` to child questions.
    bool prerequisite_transfer = false;
    double transfer_bonus = 1.5;
    std::uint32_t mastery_threshold = 3;
    std::size_t study_modules = 0;
    double mean_gap_s = 3600.0;
    double mean_elapsed_s = 30.0;
    std::int64_t start_time = 1577836800;

    void validate() const;
    Json to_json() const;
    static GeneratorConfig from_json(const Json& j);
};

struct GroundTruth {
    std::map<std::string, double> ability;
    std::map<std::string, double> difficulty;
    std::map<std::string, double> difficulty_after;// regime-change draw
    std::map<std::string, std::string> kc_of_question;
    std::vector<std::pair<std::string, std::string>> prerequisite_edges;
    // Generating probability of every question response, per student, in time order.
    std::map<std::string, std::vector<double>> probabilities;
    // sigmoid(ability - difficulty) only, without momentum/transfer/regime terms.
    std::map<std::string, std::vector<double>> irt_probabilities;

    Json to_json() const;
    static GroundTruth from_json(const Json& j);
};

struct SynthResult {
    GeneratorConfig config;
    std::string csv;
    DatasetManifest manifest;
    std::optional<Json> graph;
    Dataset dataset;
    GroundTruth truth;
};

/// Draws a dataset and its ground truth; identical output for identical configs.
SynthResult generate(const GeneratorConfig& config);

/// AUC of the generating probabilities on the responses of `students`
/// (all students when empty).
double bayes_auc(const Dataset& dataset, const GroundTruth& truth, std::span<const std::size_t> students = {});

/// Writes events.csv, manifest.json, ground_truth.json and graph.json (when present).
void write_synthetic(const SynthResult& result, const std::filesystem::path& dir);

}// namespace ktrace

#endif// KTRACE_SYNTH_HPP_
