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
#ifndef KTRACE_CLI_HPP_
#define KTRACE_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <ktrace/eval.hpp>
#include <ktrace/synth.hpp>

namespace ktrace {

inline constexpr std::string_view kVersion = "1.0.0";

/// Record of one command invocation and everything it wrote.
struct RunManifest {
    std::string command;
    std::vector<std::string> command_line;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> input_digests;// path -> digest
    std::vector<std::string> outputs;
    int jobs = 1;
    double wall_clock_s = 0.0;

    Json to_json() const;
};

/// Digest of a file's bytes.
std::string file_digest(const std::filesystem::path& path);

struct PrepareOptions {
    std::filesystem::path input;
    std::filesystem::path manifest;
    std::filesystem::path out;
    std::size_t min_responses = 10;
    int folds = 5;
    std::uint64_t seed = 0;

    Json to_json() const;
};

/// Sorted, filtered, KC-squashed events plus a fold file, written to `out`:
/// events.csv, manifest.json, graph.json (if any), kc_mapping.json, folds.json.
RunManifest cmd_prepare(const PrepareOptions& options);

struct TrainEvalOptions {
    std::filesystem::path data;// a prepared directory
    std::string recipe = "best-lr";
    int folds = 5;
    std::uint64_t seed = 0;
    std::string partition = "none";
    std::string combine = "none";// comma-separated base specs
    bool select_subset = false;
    bool logit_inputs = false;
    std::filesystem::path out = "run";
    std::filesystem::path report;// default: out/report.json
    int jobs = 1;
    double l2 = 1e-6;
    std::size_t max_epochs = 2000;
    std::size_t merge_floor = kDefaultMergeFloor;

    /// The model specification the options describe; resolution errors
    /// surface here, before any training.
    ModelSpec model_spec(const Dataset& dataset) const;
    Json to_json() const;
};

/// Full cross-validation: writes out/models/fold-<k>.json, the report,
/// roc.csv, buckets.csv and run_manifest.json.
MetricsReport cmd_train_eval(const TrainEvalOptions& options, RunManifest* manifest = nullptr);

/// Stats of a prepared directory, or of `input` with `manifest`.
DatasetStats cmd_stats(const std::filesystem::path& input, const std::filesystem::path& manifest = {});

/// Writes a synthetic dataset to `out`; returns its oracle AUC.
double cmd_synth(const GeneratorConfig& config, const std::filesystem::path& out);

/// Worker count: the --jobs flag, then KTRACE_JOBS, then "jobs" in the
/// config file, then 1.
int resolve_jobs(std::optional<int> flag, const std::filesystem::path& config = {});

/// Entry point of the ktrace tool. Returns the process exit code.
int run_cli(int argc, const char* const* argv);

}// namespace ktrace

#endif// KTRACE_CLI_HPP_
