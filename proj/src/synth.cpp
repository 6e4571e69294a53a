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
#include <ktrace/synth.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <ktrace/eval.hpp>
#include <ktrace/ingest.hpp>
#include <ktrace/random.hpp>
#include <ktrace/regression.hpp>

namespace ktrace {

namespace {

std::string padded(char prefix, std::size_t i, std::size_t count) {
    const int width = static_cast<int>(std::to_string(count > 0 ? count - 1 : 0).size());
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
    return buf;
}

Json map_json(const std::map<std::string, double>& m) {
    Json j = Json::object();
    for (const auto& [k, v] : m)
        j[k] = v;
    return j;
}

}// namespace

void GeneratorConfig::validate() const {
    if (students == 0 || questions == 0 || kcs == 0)
        throw ConfigError("generator needs at least one student, question and KC");
    if (!(ability_sd >= 0.0) || !(difficulty_sd >= 0.0))
        throw ConfigError("standard deviations must be non-negative");
    if (momentum_window == 0 || momentum_window > 64)
        throw ConfigError("momentum window must be in 1..64");
    if (!(mean_gap_s > 0.0) || !(mean_elapsed_s > 0.0))
        throw ConfigError("mean gap and elapsed time must be positive");
    if (prerequisite_transfer && kcs < 2)
        throw ConfigError("prerequisite transfer needs at least two KCs");
}

Json GeneratorConfig::to_json() const {
    Json j = {{"seed", seed},
              {"students", students},
              {"questions", questions},
              {"kcs", kcs},
              {"responses_per_student", responses_per_student},
              {"ability_sd", ability_sd},
              {"difficulty_sd", difficulty_sd},
              {"momentum", momentum},
              {"momentum_window", momentum_window},
              {"prerequisite_transfer", prerequisite_transfer},
              {"transfer_bonus", transfer_bonus},
              {"mastery_threshold", mastery_threshold},
              {"study_modules", study_modules},
              {"mean_gap_s", mean_gap_s},
              {"mean_elapsed_s", mean_elapsed_s},
              {"start_time", start_time}};
    j["regime_change_step"] = regime_change_step ? Json(*regime_change_step) : Json(nullptr);
    return j;
}

GeneratorConfig GeneratorConfig::from_json(const Json& j) {
    GeneratorConfig c;
    c.seed = j.value("seed", c.seed);
    c.students = j.value("students", c.students);
    c.questions = j.value("questions", c.questions);
    c.kcs = j.value("kcs", c.kcs);
    c.responses_per_student = j.value("responses_per_student", c.responses_per_student);
    c.ability_sd = j.value("ability_sd", c.ability_sd);
    c.difficulty_sd = j.value("difficulty_sd", c.difficulty_sd);
    c.momentum = j.value("momentum", c.momentum);
    c.momentum_window = j.value("momentum_window", c.momentum_window);
    if (j.contains("regime_change_step") && !j.at("regime_change_step").is_null())
        c.regime_change_step = j.at("regime_change_step").get<std::uint32_t>();
    c.prerequisite_transfer = j.value("prerequisite_transfer", c.prerequisite_transfer);
    c.transfer_bonus = j.value("transfer_bonus", c.transfer_bonus);
    c.mastery_threshold = j.value("mastery_threshold", c.mastery_threshold);
    c.study_modules = j.value("study_modules", c.study_modules);
    c.mean_gap_s = j.value("mean_gap_s", c.mean_gap_s);
    c.mean_elapsed_s = j.value("mean_elapsed_s", c.mean_elapsed_s);
    c.start_time = j.value("start_time", c.start_time);
    c.validate();
    return c;
}

Json GroundTruth::to_json() const {
    Json kc = Json::object();
    for (const auto& [q, k] : kc_of_question)
        kc[q] = k;
    Json edges = Json::array();
    for (const auto& [a, b] : prerequisite_edges)
        edges.push_back(Json::array({a, b}));
    Json probs = Json::object();
    for (const auto& [s, p] : probabilities)
        probs[s] = p;
    Json irt = Json::object();
    for (const auto& [s, p] : irt_probabilities)
        irt[s] = p;
    return {{"ability", map_json(ability)},
            {"difficulty", map_json(difficulty)},
            {"difficulty_after", map_json(difficulty_after)},
            {"kc_of_question", kc},
            {"prerequisite_edges", edges},
            {"probabilities", probs},
            {"irt_probabilities", irt}};
}

GroundTruth GroundTruth::from_json(const Json& j) {
    GroundTruth t;
    t.ability = j.at("ability").get<std::map<std::string, double>>();
    t.difficulty = j.at("difficulty").get<std::map<std::string, double>>();
    t.difficulty_after = j.at("difficulty_after").get<std::map<std::string, double>>();
    t.kc_of_question = j.at("kc_of_question").get<std::map<std::string, std::string>>();
    for (const auto& e : j.at("prerequisite_edges"))
        t.prerequisite_edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    t.probabilities = j.at("probabilities").get<std::map<std::string, std::vector<double>>>();
    t.irt_probabilities = j.at("irt_probabilities").get<std::map<std::string, std::vector<double>>>();
    return t;
}

SynthResult generate(const GeneratorConfig& config) {
    config.validate();
    SynthResult out;
    out.config = config;
    Rng rng(config.seed);
    GroundTruth& truth = out.truth;

    std::vector<std::string> qname(config.questions), kname(config.kcs), sname(config.students);
    for (std::size_t q = 0; q < config.questions; ++q)
        qname[q] = padded('q', q, config.questions);
    for (std::size_t k = 0; k < config.kcs; ++k)
        kname[k] = padded('k', k, config.kcs);
    for (std::size_t s = 0; s < config.students; ++s)
        sname[s] = padded('s', s, config.students);

    std::vector<double> difficulty(config.questions), difficulty_after(config.questions);
    std::vector<std::size_t> kc_of(config.questions);
    for (std::size_t q = 0; q < config.questions; ++q) {
        difficulty[q] = config.difficulty_sd * rng.normal();
        kc_of[q] = q % config.kcs;
        truth.difficulty[qname[q]] = difficulty[q];
        truth.kc_of_question[qname[q]] = kname[kc_of[q]];
    }
    if (config.regime_change_step)
        for (std::size_t q = 0; q < config.questions; ++q) {
            difficulty_after[q] = config.difficulty_sd * rng.normal();
            truth.difficulty_after[qname[q]] = difficulty_after[q];
        }
    // parent[k] < k: a random tree rooted at KC 0.
    std::vector<std::optional<std::size_t>> parent(config.kcs);
    if (config.prerequisite_transfer)
        for (std::size_t k = 1; k < config.kcs; ++k) {
            parent[k] = static_cast<std::size_t>(rng.below(k));
            truth.prerequisite_edges.emplace_back(kname[*parent[k]], kname[k]);
        }

    out.manifest.name = "synthetic";
    out.manifest.enable(Capability::ElapsedTime).enable(Capability::LagTime);
    if (config.study_modules > 0)
        out.manifest.enable(Capability::StudyModule);
    if (config.prerequisite_transfer) {
        out.manifest.enable(Capability::PrerequisiteGraph);
        out.manifest.kc_graph = "graph.json";
        Json edges = Json::array();
        for (const auto& [a, b] : truth.prerequisite_edges)
            edges.push_back(Json::array({a, b}));
        out.graph = Json{{"level", "kc"}, {"edges", edges}};
    }

    const std::size_t per_student =
        config.responses_per_student > 0 ? config.responses_per_student : config.questions;
    std::ostringstream csv;
    for (std::size_t c = 0; c < kCanonicalColumns.size(); ++c)
        csv << (c ? "," : "") << kCanonicalColumns[c];
    csv << '\n';
    const std::string tail(kCanonicalColumns.size() - 8, ',');

    for (std::size_t s = 0; s < config.students; ++s) {
        const double ability = config.ability_sd * rng.normal();
        truth.ability[sname[s]] = ability;
        std::vector<std::size_t> order;
        if (config.responses_per_student == 0) {
            order.resize(config.questions);
            std::iota(order.begin(), order.end(), 0);
            rng.shuffle(std::span<std::size_t>(order));
        } else {
            for (std::size_t i = 0; i < per_student; ++i)
                order.push_back(static_cast<std::size_t>(rng.below(config.questions)));
        }
        auto& probs = truth.probabilities[sname[s]];
        auto& irt = truth.irt_probabilities[sname[s]];
        std::vector<std::uint32_t> kc_correct(config.kcs, 0);
        std::uint32_t streak = 0;
        double t = static_cast<double>(config.start_time) + std::floor(rng.uniform() * 86400.0);
        for (std::size_t i = 0; i < order.size(); ++i) {
            const std::size_t q = order[i];
            const bool after = config.regime_change_step && i >= *config.regime_change_step;
            const double base = ability - (after ? difficulty_after[q] : difficulty[q]);
            double logit = base;
            if (config.momentum != 0.0)
                logit += config.momentum * std::min(streak, config.momentum_window) / config.momentum_window;
            if (const auto p = parent[kc_of[q]]; p && kc_correct[*p] >= config.mastery_threshold)
                logit += config.transfer_bonus;
            const double prob = sigmoid(logit);
            const bool correct = rng.uniform() < prob;
            probs.push_back(prob);
            irt.push_back(sigmoid(ability - difficulty[q]));
            streak = correct ? streak + 1 : 0;
            if (correct)
                ++kc_correct[kc_of[q]];

            const double elapsed = std::floor(rng.exponential(config.mean_elapsed_s)) + 1.0;
            const auto ts = static_cast<std::int64_t>(t);
            csv << sname[s] << ',' << ts << ",question_response," << qname[q] << ',' << kname[kc_of[q]] << ','
                << (correct ? 1 : 0) << ',' << static_cast<std::int64_t>(elapsed) << ',';
            if (config.study_modules > 0)
                csv << 'm' << (i * config.study_modules / order.size());
            csv << tail << '\n';
            // The next question arrives after this one is completed.
            t = static_cast<double>(ts) + elapsed + 1.0 + std::floor(rng.exponential(config.mean_gap_s));
        }
    }
    out.csv = csv.str();
    std::istringstream in(out.csv);
    out.dataset = load_events(in, out.manifest);
    if (out.graph)
        out.dataset.graph = load_graph(*out.graph, out.dataset.names);
    return out;
}

double bayes_auc(const Dataset& dataset, const GroundTruth& truth, std::span<const std::size_t> students) {
    std::vector<std::size_t> all;
    if (students.empty()) {
        all.resize(dataset.students.size());
        std::iota(all.begin(), all.end(), 0);
        students = all;
    }
    std::vector<double> probs;
    std::vector<std::uint8_t> labels;
    for (auto s : students) {
        const auto& log = dataset.students.at(s);
        const auto& p = truth.probabilities.at(dataset.names.students.name(log.student));
        std::size_t i = 0;
        for (const auto& ev : log.events) {
            if (!ev.is_question())
                continue;
            probs.push_back(p.at(i++));
            labels.push_back(*ev.correct ? 1 : 0);
        }
    }
    return auc(probs, labels);
}

void write_synthetic(const SynthResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f)
            throw ConfigError("cannot write " + (dir / name).string());
        f << text;
    };
    write("events.csv", result.csv);
    write("manifest.json", result.manifest.to_json().dump(2) + "\n");
    write("ground_truth.json", Json{{"config", result.config.to_json()}, {"truth", result.truth.to_json()}}.dump(2) +
                                   "\n");
    if (result.graph)
        write("graph.json", result.graph->dump(2) + "\n");
}

}// namespace ktrace
