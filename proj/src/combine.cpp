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
#include <ktrace/combine.hpp>

#include <algorithm>
#include <cmath>

#include <ktrace/eval.hpp>
#include <ktrace/parallel.hpp>
#include <ktrace/random.hpp>

namespace ktrace {

namespace {

constexpr std::uint64_t kHoldoutStream = 0x9e3779b97f4a7c15ULL;

double to_logit(double p) {
    constexpr double kEps = 1e-12;
    p = std::clamp(p, kEps, 1.0 - kEps);
    return std::log(p / (1.0 - p));
}

std::vector<std::uint8_t> labels_of(const Dataset& dataset, std::span<const std::size_t> students) {
    std::vector<std::uint8_t> out;
    for (auto s : students)
        for (const auto& ev : dataset.students.at(s).events)
            if (ev.is_question())
                out.push_back(*ev.correct ? 1 : 0);
    return out;
}

std::vector<BasePredictor> fit_bases(const Dataset& dataset, std::span<const std::size_t> students,
                                     const std::vector<BaseSpec>& specs, const BaseFitOptions& options) {
    std::vector<std::optional<BasePredictor>> fitted(specs.size());
    BaseFitOptions inner = options;
    inner.jobs = specs.size() > 1 ? 1 : options.jobs;
    parallel_for(specs.size(), options.jobs, [&](std::size_t i) {
        try {
            fitted[i] = fit_base(dataset, students, specs[i], inner);
        } catch (const std::exception& e) {
            throw CombinationError("base '" + specs[i].to_string() + "' failed to train: " + e.what());
        }
    });
    std::vector<BasePredictor> out;
    for (auto& f : fitted)
        out.push_back(std::move(*f));
    return out;
}

std::vector<std::vector<double>> predict_columns(const std::vector<BasePredictor>& bases, const Dataset& dataset,
                                                 std::span<const std::size_t> students, int jobs) {
    std::vector<std::vector<double>> cols(bases.size());
    parallel_for(bases.size(), jobs, [&](std::size_t i) { cols[i] = bases[i].predict(dataset, students, 1); });
    return cols;
}

}// namespace

SparseVector meta_features(std::span<const double> base_probs, bool logit_inputs) {
    std::vector<SparseEntry> entries;
    entries.reserve(base_probs.size() + 1);
    entries.push_back({0, 1.0});
    for (std::size_t i = 0; i < base_probs.size(); ++i)
        entries.push_back({static_cast<std::uint32_t>(i + 1), logit_inputs ? to_logit(base_probs[i]) : base_probs[i]});
    return SparseVector::from_entries(std::move(entries));
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(const Dataset& dataset,
                                                                           std::span<const std::size_t> students,
                                                                           double fraction, std::uint64_t seed) {
    if (students.size() < 2)
        throw ConfigError("a holdout split needs at least two students");
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ConfigError("holdout fraction must be in (0, 1)");
    std::vector<std::size_t> order(students.begin(), students.end());
    const auto& names = dataset.names.students;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return names.name(dataset.students[a].student) < names.name(dataset.students[b].student);
    });
    Rng rng(seed ^ kHoldoutStream);
    rng.shuffle(std::span<std::size_t>(order));
    auto n_hold = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(order.size())));
    n_hold = std::clamp<std::size_t>(n_hold, 1, order.size() - 1);
    std::vector<std::size_t> holdout(order.end() - static_cast<std::ptrdiff_t>(n_hold), order.end());
    std::vector<std::size_t> fit(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_hold));
    std::sort(fit.begin(), fit.end());
    std::sort(holdout.begin(), holdout.end());
    return {std::move(fit), std::move(holdout)};
}

Model fit_meta(const std::vector<std::vector<double>>& base_probs, std::span<const std::uint8_t> labels,
               bool logit_inputs, const TrainConfig& config) {
    const std::size_t m = base_probs.size();
    std::vector<SparseVector> phi(labels.size());
    std::vector<double> row(m);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (std::size_t b = 0; b < m; ++b)
            row[b] = base_probs[b].at(i);
        phi[i] = meta_features(row, logit_inputs);
    }
    const std::uint32_t unpenalized[] = {0};
    auto fit = fit_logistic(phi, labels, static_cast<std::uint32_t>(m + 1), unpenalized, config);
    return Model(Recipe{}, "meta", std::move(fit.weights), fit.metadata);
}

// Combined model -------------------------------------------------------------

CombinedModel::CombinedModel(std::vector<BasePredictor> bases, Model meta, CombineConfig config,
                             std::vector<std::string> holdout_students)
    : bases_(std::move(bases)), meta_(std::move(meta)), config_(config), holdout_(std::move(holdout_students)) {}

double CombinedModel::combine(std::span<const double> base_probs) const {
    return meta_.predict_proba(meta_features(base_probs, config_.logit_inputs));
}

std::vector<std::vector<double>> CombinedModel::base_predictions(const Dataset& dataset,
                                                                 std::span<const std::size_t> students,
                                                                 int jobs) const {
    return predict_columns(bases_, dataset, students, jobs);
}

std::vector<double> CombinedModel::predict(const Dataset& dataset, std::span<const std::size_t> students,
                                           int jobs) const {
    const auto cols = base_predictions(dataset, students, jobs);
    const std::size_t n = cols.empty() ? 0 : cols.front().size();
    std::vector<double> out(n), row(cols.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t b = 0; b < cols.size(); ++b)
            row[b] = cols[b][i];
        out[i] = combine(row);
    }
    return out;
}

Json CombinedModel::manifest_json() const {
    Json bases = Json::array();
    for (const auto& b : bases_)
        bases.push_back(b.spec().to_string());
    return {{"version", 1},
            {"bases", bases},
            {"meta", meta_.to_json()},
            {"logit_inputs", config_.logit_inputs},
            {"meta_holdout", {{"fraction", config_.holdout_fraction}, {"students", holdout_}}}};
}

CombinedModel fit_combined(const Dataset& dataset, std::span<const std::size_t> students,
                           const std::vector<BaseSpec>& specs, const BaseFitOptions& options,
                           const CombineConfig& config) {
    if (specs.empty())
        throw ConfigError("a combined model needs at least one base");
    auto [fit_part, holdout] = holdout_split(dataset, students, config.holdout_fraction, config.seed);
    const auto stage_one = fit_bases(dataset, fit_part, specs, options);
    const auto cols = predict_columns(stage_one, dataset, holdout, options.jobs);
    const auto labels = labels_of(dataset, holdout);
    TrainConfig meta_config = options.train;
    meta_config.jobs = options.jobs;
    meta_config.initial_weights.reset();
    auto meta = fit_meta(cols, labels, config.logit_inputs, meta_config);
    auto bases = fit_bases(dataset, students, specs, options);
    std::vector<std::string> holdout_names;
    for (auto s : holdout)
        holdout_names.push_back(dataset.names.students.name(dataset.students[s].student));
    return CombinedModel(std::move(bases), std::move(meta), config, std::move(holdout_names));
}

// Subset selection -----------------------------------------------------------

Json Selection::to_json(const std::vector<BaseSpec>& candidates) const {
    auto names = [&](const std::vector<std::size_t>& idx) {
        Json a = Json::array();
        for (auto i : idx)
            a.push_back(candidates.at(i).to_string());
        return a;
    };
    Json scores_json = Json::array();
    for (const auto& s : scores)
        scores_json.push_back({{"bases", names(s.members)}, {"auc", s.auc}});
    return {{"chosen", names(chosen)}, {"subsets", scores_json}};
}

Selection select_bases(const Dataset& dataset, std::span<const std::size_t> train,
                       std::span<const std::size_t> validation, const std::vector<BaseSpec>& candidates,
                       const BaseFitOptions& options, const CombineConfig& config) {
    const std::size_t m = candidates.size();
    if (m == 0 || m > 12)
        throw ConfigError("subset selection needs 1 to 12 candidates");
    auto [fit_part, holdout] = holdout_split(dataset, train, config.holdout_fraction, config.seed);
    const auto bases = fit_bases(dataset, fit_part, candidates, options);
    const auto hold_cols = predict_columns(bases, dataset, holdout, options.jobs);
    const auto val_cols = predict_columns(bases, dataset, validation, options.jobs);
    const auto hold_labels = labels_of(dataset, holdout);
    const auto val_labels = labels_of(dataset, validation);

    const std::size_t subsets = (std::size_t{1} << m) - 1;
    Selection sel;
    sel.scores.resize(subsets);
    TrainConfig meta_config = options.train;
    meta_config.jobs = 1;
    meta_config.initial_weights.reset();
    parallel_for(subsets, options.jobs, [&](std::size_t s) {
        const std::size_t mask = s + 1;
        SubsetScore score;
        std::vector<std::vector<double>> hold, val;
        for (std::size_t i = 0; i < m; ++i)
            if (mask & (std::size_t{1} << i)) {
                score.members.push_back(i);
                hold.push_back(hold_cols[i]);
                val.push_back(val_cols[i]);
            }
        const auto meta = fit_meta(hold, hold_labels, config.logit_inputs, meta_config);
        std::vector<double> probs(val_labels.size()), row(val.size());
        for (std::size_t r = 0; r < probs.size(); ++r) {
            for (std::size_t b = 0; b < val.size(); ++b)
                row[b] = val[b][r];
            probs[r] = meta.predict_proba(meta_features(row, config.logit_inputs));
        }
        score.auc = auc(probs, val_labels);
        sel.scores[s] = std::move(score);
    });
    const SubsetScore* best = nullptr;
    for (const auto& s : sel.scores)
        if (!best || s.auc > best->auc || (s.auc == best->auc && s.members.size() < best->members.size()))
            best = &s;
    sel.chosen = best->members;
    return sel;
}

}// namespace ktrace
