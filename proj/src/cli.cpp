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
#include <ktrace/cli.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

namespace ktrace {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& path, const std::string& text, RunManifest* manifest) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out)
        throw ConfigError("failed writing " + path.string());
    if (manifest)
        manifest->outputs.push_back(path.string());
}

std::string fmt_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            if (!cur.empty())
                out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty())
        out.push_back(cur);
    return out;
}

Json base_json(const BasePredictor& base, const Interners& names) {
    Json j = {{"spec", base.spec().to_string()}, {"encoder", base.encoder().to_json(names)}};
    if (base.partitioned())
        j["partitioned"] = base.partitioned()->to_json();
    else
        j["model"] = base.model().to_json();
    return j;
}

class Stopwatch {
  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}// namespace

Json RunManifest::to_json() const {
    return {{"command", command},
            {"command_line", command_line},
            {"config_digest", config_digest},
            {"seed", seed},
            {"input_digests", input_digests},
            {"outputs", outputs},
            {"jobs", jobs},
            {"wall_clock_s", wall_clock_s},
            {"versions", {{"ktrace", kVersion}, {"json", "nlohmann " + std::to_string(NLOHMANN_JSON_VERSION_MAJOR) +
                                                             "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR)},
                          {"cli11", CLI11_VERSION}}}};
}

std::string file_digest(const fs::path& path) { return hex_digest(read_file(path)); }

// prepare --------------------------------------------------------------------

Json PrepareOptions::to_json() const {
    return {{"input", input.string()},
            {"manifest", manifest.string()},
            {"min_responses", min_responses},
            {"folds", folds},
            {"seed", seed}};
}

RunManifest cmd_prepare(const PrepareOptions& options) {
    Stopwatch clock;
    RunManifest run;
    run.command = "prepare";
    run.seed = options.seed;
    run.config_digest = hex_digest(options.to_json().dump());
    run.input_digests[options.input.string()] = file_digest(options.input);
    run.input_digests[options.manifest.string()] = file_digest(options.manifest);

    Dataset raw = load_dataset(options.input, options.manifest);
    if (raw.graph && raw.manifest.kc_graph)
        run.input_digests[(options.manifest.parent_path() / *raw.manifest.kc_graph).string()] =
            file_digest(options.manifest.parent_path() / *raw.manifest.kc_graph);
    auto squashed = squash_multi_kc(filter_students(std::move(raw), options.min_responses));
    Dataset& d = squashed.dataset;
    const auto folds = split_folds(d, options.folds, options.seed);

    fs::create_directories(options.out);
    std::ostringstream csv;
    write_events(csv, d);
    write_file(options.out / "events.csv", csv.str(), &run);
    DatasetManifest manifest = d.manifest;
    if (d.graph) {
        manifest.kc_graph = "graph.json";
        write_file(options.out / "graph.json", graph_to_json(*d.graph, d.names).dump(2) + "\n", &run);
    } else {
        manifest.kc_graph.reset();
    }
    write_file(options.out / "manifest.json", manifest.to_json().dump(2) + "\n", &run);
    write_file(options.out / "kc_mapping.json", squashed.mapping_json().dump(2) + "\n", &run);
    write_file(options.out / "folds.json", folds.to_json().dump(2) + "\n", &run);
    Json quality = {{"students", d.students.size()},
                    {"responses", d.response_count()},
                    {"events", d.event_count()},
                    {"clamped_lags", d.quality.clamped_lags}};
    write_file(options.out / "quality.json", quality.dump(2) + "\n", &run);
    run.outputs.push_back((options.out / "run_manifest.json").string());
    run.wall_clock_s = clock.seconds();
    write_file(options.out / "run_manifest.json", run.to_json().dump(2) + "\n", nullptr);
    return run;
}

// train-eval -----------------------------------------------------------------

ModelSpec TrainEvalOptions::model_spec(const Dataset& dataset) const {
    ModelSpec spec;
    spec.base = BaseSpec::parse(recipe);
    if (partition != "none" && !partition.empty())
        spec.base.partition = PartitionScheme::parse(partition);
    if (combine != "none" && !combine.empty())
        for (const auto& b : split_list(combine))
            spec.combine.push_back(BaseSpec::parse(b));
    spec.select_subset = select_subset;
    spec.fit.train.l2 = l2;
    spec.fit.train.max_epochs = max_epochs;
    spec.fit.train.seed = seed;
    spec.fit.train.validate();
    spec.fit.merge_floor = merge_floor;
    spec.fit.jobs = jobs;
    spec.combine_config.logit_inputs = logit_inputs;
    spec.combine_config.seed = seed;
    if (folds < 2)
        throw ConfigError("at least two folds are required");
    if (select_subset && spec.combine.empty())
        throw ConfigError("--select needs --combine");
    // Resolve every recipe now so a mismatch fails before training.
    std::vector<BaseSpec> all = spec.combine;
    if (all.empty())
        all.push_back(spec.base);
    for (const auto& b : all) {
        const auto r = resolve(b.model, dataset.manifest, b.extras, spec.fit.augmented_override);
        r.recipe.validate();
        if (b.partition)
            b.partition->validate();
    }
    return spec;
}

Json TrainEvalOptions::to_json() const {
    return {{"data", data.string()},   {"recipe", recipe},       {"folds", folds},
            {"seed", seed},            {"partition", partition}, {"combine", combine},
            {"select", select_subset}, {"logit_inputs", logit_inputs}, {"l2", l2},
            {"max_epochs", max_epochs}, {"merge_floor", merge_floor}};
}

MetricsReport cmd_train_eval(const TrainEvalOptions& options, RunManifest* manifest) {
    Stopwatch clock;
    RunManifest run;
    run.command = "train-eval";
    run.seed = options.seed;
    run.jobs = options.jobs;
    run.config_digest = hex_digest(options.to_json().dump());
    const auto events = options.data / "events.csv";
    const auto manifest_path = options.data / "manifest.json";
    run.input_digests[events.string()] = file_digest(events);
    run.input_digests[manifest_path.string()] = file_digest(manifest_path);
    const Dataset dataset = load_dataset(events, manifest_path);
    const ModelSpec spec = options.model_spec(dataset);

    FoldAssignment folds;
    const auto fold_path = options.data / "folds.json";
    if (fs::exists(fold_path)) {
        run.input_digests[fold_path.string()] = file_digest(fold_path);
        folds = FoldAssignment::from_json(Json::parse(read_file(fold_path)));
    }
    if (folds.k != options.folds)
        folds = split_folds(dataset, options.folds, options.seed);

    const auto model_dir = options.out / "models";
    CVHooks hooks;
    hooks.on_base = [&](int fold, const BasePredictor& base) {
        write_file(model_dir / ("fold-" + std::to_string(fold) + ".json"), base_json(base, dataset.names).dump() + "\n",
                   &run);
    };
    hooks.on_combined = [&](int fold, const CombinedModel& combined) {
        Json j = combined.manifest_json();
        Json bases = Json::array();
        for (const auto& b : combined.bases())
            bases.push_back(base_json(b, dataset.names));
        j["base_models"] = bases;
        write_file(model_dir / ("fold-" + std::to_string(fold) + ".json"), j.dump() + "\n", &run);
    };
    MetricsReport report = cross_validate(dataset, folds, spec, hooks);

    const auto report_path = options.report.empty() ? options.out / "report.json" : options.report;
    write_file(report_path, report.to_json().dump(2) + "\n", &run);
    std::string roc = "fpr,tpr\n";
    for (const auto& p : report.roc)
        roc += fmt_real(p.fpr) + "," + fmt_real(p.tpr) + "\n";
    write_file(options.out / "roc.csv", roc, &run);
    std::string buckets = "bucket,responses,accuracy,auc\n";
    for (const auto& b : report.buckets)
        buckets += b.key + "," + std::to_string(b.responses) + "," + fmt_real(b.accuracy) + "," +
                   (b.auc ? fmt_real(*b.auc) : std::string()) + "\n";
    write_file(options.out / "buckets.csv", buckets, &run);
    run.outputs.push_back((options.out / "run_manifest.json").string());
    run.wall_clock_s = clock.seconds();
    write_file(options.out / "run_manifest.json", run.to_json().dump(2) + "\n", nullptr);
    if (manifest)
        *manifest = run;
    return report;
}

// stats / synth --------------------------------------------------------------

DatasetStats cmd_stats(const fs::path& input, const fs::path& manifest) {
    if (fs::is_directory(input))
        return dataset_stats(load_dataset(input / "events.csv", input / "manifest.json"));
    if (manifest.empty())
        throw ConfigError("stats on a CSV file needs --manifest");
    return dataset_stats(load_dataset(input, manifest));
}

double cmd_synth(const GeneratorConfig& config, const fs::path& out) {
    const auto result = generate(config);
    write_synthetic(result, out);
    return bayes_auc(result.dataset, result.truth);
}

// Entry point ----------------------------------------------------------------

int resolve_jobs(std::optional<int> flag, const fs::path& config) {
    if (flag)
        return *flag;
    if (const char* env = std::getenv("KTRACE_JOBS"); env && *env) {
        try {
            return std::stoi(env);
        } catch (const std::exception&) {
            throw ConfigError(std::string("KTRACE_JOBS is not an integer: ") + env);
        }
    }
    if (!config.empty()) {
        const Json j = Json::parse(read_file(config));
        if (j.contains("jobs"))
            return j.at("jobs").get<int>();
    }
    return 1;
}


namespace {

std::string json_scalar(const Json& v) {
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_boolean())
        return v.get<bool>() ? "true" : "false";
    return v.dump();
}

// Options not given on the command line take their value from the file.
void apply_config_file(CLI::App& sub, const fs::path& path) {
    const Json j = Json::parse(read_file(path));
    if (!j.is_object())
        throw ConfigError("config file must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
        CLI::Option* opt = nullptr;
        try {
            opt = sub.get_option("--" + key);
        } catch (const CLI::OptionNotFound&) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        if (opt->count() > 0 || key == "config" || key == "jobs")
            continue;
        opt->clear();
        if (value.is_array())
            for (const auto& e : value)
                opt->add_result(json_scalar(e));
        else
            opt->add_result(json_scalar(value));
        opt->run_callback();
    }
}

}// namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Logistic-regression knowledge tracing", "ktrace"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    std::vector<std::string> command_line(argv, argv + argc);

    PrepareOptions prep;
    fs::path prep_config;
    auto* prepare = app.add_subcommand("prepare", "Validate, sort, filter and squash a canonical event log");
    prepare->add_option("--input", prep.input, "Canonical events CSV")->required();
    prepare->add_option("--manifest", prep.manifest, "Dataset manifest JSON")->required();
    prepare->add_option("--out", prep.out, "Output directory")->required();
    prepare->add_option("--min-responses", prep.min_responses, "Drop students with fewer responses");
    prepare->add_option("--folds", prep.folds, "Number of student-level folds");
    prepare->add_option("--seed", prep.seed, "Fold assignment seed");
    prepare->add_option("--config", prep_config, "JSON file of option defaults");

    TrainEvalOptions te;
    fs::path te_config;
    int te_jobs = 1;
    auto* train = app.add_subcommand("train-eval", "Cross-validate a model on a prepared dataset");
    train->add_option("--data", te.data, "Prepared directory")->required();
    train->add_option("--recipe", te.recipe, "Model: irt, pfa, das3h, best-lr, best-lr+, augmented-lr [|family...]");
    train->add_option("--folds", te.folds, "Number of folds");
    train->add_option("--seed", te.seed, "Seed for folds, holdout split and training");
    train->add_option("--partition", te.partition, "Partition scheme or none");
    train->add_option("--combine", te.combine, "Comma-separated base specs or none");
    train->add_flag("--select", te.select_subset, "Choose the best subset of --combine bases on fold 0");
    train->add_flag("--logit-inputs", te.logit_inputs, "Feed base logits to the meta model");
    train->add_option("--out", te.out, "Run output directory");
    train->add_option("--report", te.report, "MetricsReport path (default <out>/report.json)");
    train->add_option("--l2", te.l2, "L2 penalty");
    train->add_option("--max-epochs", te.max_epochs, "Training epoch cap");
    train->add_option("--merge-floor", te.merge_floor, "Smallest partition trained on its own");
    auto* te_jobs_opt = train->add_option("--jobs", te_jobs, "Worker threads (env KTRACE_JOBS)");
    train->add_option("--config", te_config, "JSON file of option defaults");

    fs::path stats_input, stats_manifest, stats_out;
    auto* stats = app.add_subcommand("stats", "Dataset statistics");
    stats->add_option("--input", stats_input, "Prepared directory or events CSV")->required();
    stats->add_option("--manifest", stats_manifest, "Manifest for a CSV input");
    stats->add_option("--out", stats_out, "Write the JSON here instead of stdout");

    GeneratorConfig gen;
    fs::path synth_out, synth_config;
    std::uint32_t regime = 0;
    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with known ground truth");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--seed", gen.seed);
    synth->add_option("--students", gen.students);
    synth->add_option("--questions", gen.questions);
    synth->add_option("--kcs", gen.kcs);
    synth->add_option("--responses", gen.responses_per_student, "Responses per student (0: each question once)");
    synth->add_option("--momentum", gen.momentum);
    synth->add_option("--regime-step", regime, "Response index where difficulties are redrawn");
    synth->add_flag("--transfer", gen.prerequisite_transfer, "Prerequisite mastery transfer");
    synth->add_option("--transfer-bonus", gen.transfer_bonus);
    synth->add_option("--modules", gen.study_modules);
    synth->add_option("--config", synth_config, "JSON file of option defaults");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*prepare) {
            if (!prep_config.empty())
                apply_config_file(*prepare, prep_config);
            auto run = cmd_prepare(prep);
            run.command_line = command_line;
            write_file(prep.out / "run_manifest.json", run.to_json().dump(2) + "\n", nullptr);
            std::cout << "prepared " << prep.out.string() << " (" << run.outputs.size() << " files)\n";
        } else if (*train) {
            if (!te_config.empty())
                apply_config_file(*train, te_config);
            te.jobs = resolve_jobs(te_jobs_opt->count() > 0 ? std::optional<int>(te_jobs) : std::nullopt, te_config);
            RunManifest run;
            TrainEvalOptions opts = te;
            const auto report = cmd_train_eval(opts, &run);
            run.command_line = command_line;
            write_file(opts.out / "run_manifest.json", run.to_json().dump(2) + "\n", nullptr);
            std::cout << "accuracy " << fmt_real(report.mean_accuracy);
            if (report.mean_auc)
                std::cout << "  auc " << fmt_real(*report.mean_auc);
            std::cout << "\n";
        } else if (*stats) {
            const auto st = cmd_stats(stats_input, stats_manifest).to_json().dump(2) + "\n";
            if (stats_out.empty())
                std::cout << st;
            else
                write_file(stats_out, st, nullptr);
        } else if (*synth) {
            if (!synth_config.empty())
                apply_config_file(*synth, synth_config);
            if (synth->get_option("--regime-step")->count() > 0 || regime > 0)
                gen.regime_change_step = regime;
            const double bayes = cmd_synth(gen, synth_out);
            std::cout << "bayes_auc " << fmt_real(bayes) << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "ktrace: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}// namespace ktrace
