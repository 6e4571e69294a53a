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
#include <ktrace/eval.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ktrace {

namespace {

void check_inputs(std::span<const double> probs, std::span<const std::uint8_t> labels) {
    if (probs.size() != labels.size())
        throw ArgumentError("probabilities and labels differ in length");
    if (probs.empty())
        throw UndefinedMetric("metric of an empty sample");
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (std::isnan(probs[i]))
            throw ArgumentError("NaN score");
        if (labels[i] > 1)
            throw ArgumentError("labels must be 0 or 1");
    }
}

std::vector<std::size_t> order_by_score(std::span<const double> probs) {
    std::vector<std::size_t> idx(probs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });
    return idx;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}// namespace

double accuracy(std::span<const double> probs, std::span<const std::uint8_t> labels, double threshold) {
    check_inputs(probs, labels);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < probs.size(); ++i)
        hits += (probs[i] >= threshold) == (labels[i] == 1) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(probs.size());
}

double auc(std::span<const double> probs, std::span<const std::uint8_t> labels) {
    check_inputs(probs, labels);
    const auto idx = order_by_score(probs);
    // Twice the concordant count plus the tied count, kept in integers.
    std::uint64_t doubled = 0, neg_below = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        std::uint64_t gp = 0, gn = 0;
        while (j < idx.size() && probs[idx[j]] == probs[idx[i]]) {
            (labels[idx[j]] ? gp : gn) += 1;
            ++j;
        }
        doubled += 2 * gp * neg_below + gp * gn;
        neg_below += gn;
        pos += gp;
        neg += gn;
        i = j;
    }
    if (pos == 0 || neg == 0)
        throw UndefinedMetric("AUC needs both positive and negative labels");
    return static_cast<double>(doubled) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> probs, std::span<const std::uint8_t> labels) {
    check_inputs(probs, labels);
    auto idx = order_by_score(probs);
    std::reverse(idx.begin(), idx.end());
    std::uint64_t pos = 0, neg = 0;
    for (auto y : labels)
        (y ? pos : neg) += 1;
    if (pos == 0 || neg == 0)
        throw UndefinedMetric("ROC needs both positive and negative labels");
    std::vector<RocPoint> curve{{0.0, 0.0}};
    std::uint64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && probs[idx[j]] == probs[idx[i]]) {
            (labels[idx[j]] ? tp : fp) += 1;
            ++j;
        }
        curve.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                         static_cast<double>(tp) / static_cast<double>(pos)});
        i = j;
    }
    return curve;
}

double trapezoid_area(std::span<const RocPoint> curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i)
        area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
    return area;
}

std::pair<double, double> mean_and_variance(std::span<const double> values) {
    if (values.empty())
        return {0.0, 0.0};
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values)
        mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values)
        var += (v - mean) * (v - mean);
    return {mean, var / n};
}

// Reports --------------------------------------------------------------------

Json MetricsReport::to_json() const {
    Json folds_json = Json::array();
    for (const auto& f : folds)
        folds_json.push_back({{"fold", f.fold},
                              {"train_students", f.train_students},
                              {"test_students", f.test_students},
                              {"responses", f.responses},
                              {"acc", f.accuracy},
                              {"auc", optional_json(f.auc)},
                              {"details", f.details}});
    Json buckets_json = Json::array();
    for (const auto& b : buckets)
        buckets_json.push_back(
            {{"bucket", b.key}, {"responses", b.responses}, {"acc", b.accuracy}, {"auc", optional_json(b.auc)}});
    Json roc_json = Json::array();
    for (const auto& p : roc)
        roc_json.push_back({p.fpr, p.tpr});
    return {{"version", 1},
            {"spec", spec},
            {"folds", folds_json},
            {"mean", {{"acc", mean_accuracy}, {"auc", optional_json(mean_auc)}}},
            {"variance", {{"acc", var_accuracy}, {"auc", optional_json(var_auc)}}},
            {"buckets", buckets_json},
            {"roc", roc_json}};
}

Json ModelSpec::to_json() const {
    Json j = {{"base", base.to_string()},
              {"train", fit.train.to_json()},
              {"merge_floor", fit.merge_floor}};
    if (fit.augmented_override) {
        Json a = Json::array();
        for (const auto& f : *fit.augmented_override)
            a.push_back(ktrace::to_string(f));
        j["augmented_override"] = a;
    }
    if (!combine.empty()) {
        Json c = Json::array();
        for (const auto& b : combine)
            c.push_back(b.to_string());
        j["combine"] = {{"bases", c},
                        {"select_subset", select_subset},
                        {"logit_inputs", combine_config.logit_inputs},
                        {"meta_holdout", combine_config.holdout_fraction},
                        {"seed", combine_config.seed}};
    }
    return j;
}

namespace {

struct Pooled {
    std::vector<double> probs;
    std::vector<std::uint8_t> labels;
};

std::optional<double> safe_auc(std::span<const double> probs, std::span<const std::uint8_t> labels) {
    const auto pos = std::count(labels.begin(), labels.end(), std::uint8_t{1});
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size()))
        return std::nullopt;
    return auc(probs, labels);
}

Json partition_summary(const PartitionedModel& pm) {
    Json parts = Json::array();
    for (const auto& p : pm.info())
        parts.push_back({{"key", p.key},
                         {"examples", p.examples},
                         {"single_class", p.single_class},
                         {"routed_to_fallback", p.routed_to_fallback}});
    return {{"scheme", pm.scheme().to_string()}, {"partitions", parts}};
}

}// namespace

MetricsReport cross_validate(const Dataset& dataset, const FoldAssignment& folds, const ModelSpec& spec,
                             const CVHooks& hooks) {
    MetricsReport report;
    report.spec = spec.to_json();
    report.spec["folds"] = folds.k;
    const int jobs = spec.fit.jobs;
    const auto buckets = PartitionScheme::response_index();

    std::vector<BaseSpec> chosen = spec.combine;
    Pooled all;
    std::map<std::string, Pooled> by_bucket;
    std::vector<double> fold_acc, fold_auc;
    for (int f = 0; f < folds.k; ++f) {
        const auto train = folds.train_students(dataset, f);
        const auto test = folds.test_students(dataset, f);
        if (hooks.on_train_students)
            hooks.on_train_students(f, train);
        FoldMetrics fm;
        fm.fold = f;
        fm.train_students = train.size();
        fm.test_students = test.size();

        ExampleSet test_examples;
        std::vector<double> probs;
        if (spec.combine.empty()) {
            const auto base = fit_base(dataset, train, spec.base, spec.fit);
            test_examples = base.examples(dataset, test, jobs);
            probs = base.predict(dataset, test_examples);
            if (base.partitioned())
                fm.details["partitions"] = partition_summary(*base.partitioned());
            fm.details["train_nll"] = base.model().metadata().final_nll;
            fm.details["epochs"] = base.model().metadata().epochs;
            if (hooks.on_base)
                hooks.on_base(f, base);
        } else {
            if (f == 0 && spec.select_subset) {
                const auto sel = select_bases(dataset, train, test, spec.combine, spec.fit, spec.combine_config);
                chosen.clear();
                for (auto i : sel.chosen)
                    chosen.push_back(spec.combine[i]);
                fm.details["selection"] = sel.to_json(spec.combine);
            }
            const auto combined = fit_combined(dataset, train, chosen, spec.fit, spec.combine_config);
            test_examples = combined.bases().front().examples(dataset, test, jobs);
            probs = combined.predict(dataset, test, jobs);
            Json bases = Json::array();
            for (const auto& b : combined.bases())
                bases.push_back(b.spec().to_string());
            fm.details["bases"] = bases;
            fm.details["meta_weights"] = combined.meta().weights();
            fm.details["meta_holdout_students"] = combined.holdout_students().size();
            if (hooks.on_combined)
                hooks.on_combined(f, combined);
        }
        if (hooks.on_predictions)
            hooks.on_predictions(f, test_examples, probs);

        fm.responses = probs.size();
        fm.accuracy = accuracy(probs, test_examples.labels);
        fm.auc = safe_auc(probs, test_examples.labels);
        fold_acc.push_back(fm.accuracy);
        if (fm.auc)
            fold_auc.push_back(*fm.auc);
        for (std::size_t i = 0; i < probs.size(); ++i) {
            all.probs.push_back(probs[i]);
            all.labels.push_back(test_examples.labels[i]);
            auto& b = by_bucket[buckets.key(test_examples.context[i], dataset.names)];
            b.probs.push_back(probs[i]);
            b.labels.push_back(test_examples.labels[i]);
        }
        report.folds.push_back(std::move(fm));
    }

    std::tie(report.mean_accuracy, report.var_accuracy) = mean_and_variance(fold_acc);
    if (!fold_auc.empty()) {
        const auto [m, v] = mean_and_variance(fold_auc);
        report.mean_auc = m;
        report.var_auc = v;
    }
    // Buckets in split-point order rather than lexical order.
    for (std::size_t i = 0; i + 1 < buckets.splitpoints.size(); ++i) {
        ExampleContext probe;
        probe.response_index = static_cast<std::uint32_t>(buckets.splitpoints[i]);
        const auto key = buckets.key(probe, dataset.names);
        auto it = by_bucket.find(key);
        if (it == by_bucket.end())
            continue;
        report.buckets.push_back({key, it->second.labels.size(), accuracy(it->second.probs, it->second.labels),
                                  safe_auc(it->second.probs, it->second.labels)});
    }
    if (safe_auc(all.probs, all.labels))
        report.roc = roc_curve(all.probs, all.labels);
    return report;
}

MetricsReport cross_validate(const Dataset& dataset, const ModelSpec& spec, int k, std::uint64_t seed,
                             const CVHooks& hooks) {
    return cross_validate(dataset, split_folds(dataset, k, seed), spec, hooks);
}

// Dataset statistics ---------------------------------------------------------

Json DatasetStats::to_json() const {
    Json hist = Json::array();
    for (const auto& [n, count] : responses_per_student)
        hist.push_back({n, count});
    return {{"students", students},
            {"responses", responses},
            {"events", events},
            {"correctness", correctness},
            {"responses_per_student", hist},
            {"successor_pairs", successor_pairs},
            {"next_question_predictability", next_question_predictability},
            {"next_kc_predictability", next_kc_predictability}};
}

DatasetStats dataset_stats(const Dataset& dataset) {
    DatasetStats st;
    st.students = dataset.students.size();
    std::size_t correct = 0;
    std::map<Id, std::map<Id, std::size_t>> q_next;
    std::map<std::vector<Id>, std::map<std::vector<Id>, std::size_t>> kc_next;
    for (const auto& log : dataset.students) {
        st.events += log.events.size();
        std::size_t n = 0;
        const InteractionEvent* prev = nullptr;
        for (const auto& ev : log.events) {
            if (!ev.is_question())
                continue;
            ++n;
            correct += *ev.correct ? 1 : 0;
            if (prev) {
                ++q_next[prev->question][ev.question];
                ++kc_next[prev->kcs][ev.kcs];
                ++st.successor_pairs;
            }
            prev = &ev;
        }
        st.responses += n;
        ++st.responses_per_student[n];
    }
    st.correctness = st.responses ? static_cast<double>(correct) / static_cast<double>(st.responses) : 0.0;
    auto modal_hits = [](const auto& table) {
        std::size_t hits = 0;
        for (const auto& [from, successors] : table) {
            std::size_t best = 0;
            for (const auto& [to, count] : successors)
                best = std::max(best, count);
            hits += best;
        }
        return hits;
    };
    if (st.successor_pairs > 0) {
        const double pairs = static_cast<double>(st.successor_pairs);
        st.next_question_predictability = static_cast<double>(modal_hits(q_next)) / pairs;
        st.next_kc_predictability = static_cast<double>(modal_hits(kc_next)) / pairs;
    }
    return st;
}

}// namespace ktrace
