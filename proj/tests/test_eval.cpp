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
#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include <ktrace/eval.hpp>
#include <ktrace/random.hpp>
#include <ktrace/synth.hpp>

#include "helpers.hpp"
#include "oracles.hpp"

namespace ktrace {
namespace {

using testing::Row;

struct Instance {
    std::vector<double> probs;
    std::vector<std::uint8_t> labels;
};

// Scores drawn from a coarse grid so that ties are common.
Instance random_instance(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    Instance in;
    for (std::size_t i = 0; i < n; ++i) {
        in.probs.push_back(static_cast<double>(rng.below(20)) / 20.0 + 0.01);
        in.labels.push_back(rng.bernoulli(in.probs.back()) ? 1 : 0);
    }
    in.labels[0] = 0;
    in.labels[1] = 1;
    return in;
}

TEST(Accuracy, Examples) {
    const std::vector<double> p = {0.6, 0.4};
    const std::vector<std::uint8_t> y = {1, 0};
    EXPECT_EQ(accuracy(p, y), 1.0);
    const std::vector<double> half = {0.5};
    const std::vector<std::uint8_t> one = {1};
    EXPECT_EQ(accuracy(half, one), 1.0);
    EXPECT_THROW(accuracy(std::vector<double>{}, std::vector<std::uint8_t>{}), ArgumentError);
}

TEST(Accuracy, MatchesLoop) {
    const auto in = random_instance(11, 1000);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < in.probs.size(); ++i)
        hits += (in.probs[i] >= 0.5) == (in.labels[i] == 1);
    EXPECT_EQ(accuracy(in.probs, in.labels), static_cast<double>(hits) / 1000.0);
}

TEST(Auc, Examples) {
    EXPECT_EQ(auc(std::vector<double>{0.9, 0.1}, std::vector<std::uint8_t>{1, 0}), 1.0);
    EXPECT_EQ(auc(std::vector<double>{0.3, 0.3, 0.3}, std::vector<std::uint8_t>{1, 0, 1}), 0.5);
    EXPECT_EQ(auc(std::vector<double>{0.9, 0.8, 0.3}, std::vector<std::uint8_t>{1, 0, 1}), 0.5);
    EXPECT_THROW(auc(std::vector<double>{0.9, 0.8}, std::vector<std::uint8_t>{1, 1}), UndefinedMetric);
}

TEST(Auc, MatchesPairwiseOracle) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto in = random_instance(seed, 50 + seed * 7);
        EXPECT_NEAR(auc(in.probs, in.labels), testing::pairwise_auc(in.probs, in.labels), 1e-12) << seed;
    }
}

TEST(Auc, MonotoneInvariantAndLabelFlip) {
    const auto in = random_instance(5, 400);
    std::vector<double> cubed(in.probs.size());
    std::transform(in.probs.begin(), in.probs.end(), cubed.begin(), [](double x) { return std::pow(x, 3) - 2.0; });
    EXPECT_EQ(auc(cubed, in.labels), auc(in.probs, in.labels));
    std::vector<std::uint8_t> flipped(in.labels.size());
    std::transform(in.labels.begin(), in.labels.end(), flipped.begin(), [](std::uint8_t y) { return 1 - y; });
    EXPECT_NEAR(auc(in.probs, in.labels) + auc(in.probs, flipped), 1.0, 1e-12);
}

TEST(Roc, Shape) {
    const std::vector<double> sep = {0.9, 0.8, 0.2, 0.1};
    const std::vector<std::uint8_t> y = {1, 1, 0, 0};
    const auto curve = roc_curve(sep, y);
    EXPECT_EQ(curve.front().fpr, 0.0);
    EXPECT_EQ(curve.front().tpr, 0.0);
    EXPECT_EQ(curve.back().fpr, 1.0);
    EXPECT_EQ(curve.back().tpr, 1.0);
    EXPECT_EQ(curve.size(), 5u);
    EXPECT_TRUE(std::any_of(curve.begin(), curve.end(), [](const RocPoint& p) { return p.fpr == 0.0 && p.tpr == 1.0; }));

    const std::vector<double> ties = {0.4, 0.4, 0.4};
    const auto flat = roc_curve(ties, std::vector<std::uint8_t>{1, 0, 1});
    ASSERT_EQ(flat.size(), 2u);
    EXPECT_EQ(trapezoid_area(flat), 0.5);
}

TEST(Roc, TrapezoidEqualsAuc) {
    for (std::uint64_t seed = 100; seed < 130; ++seed) {
        const auto in = random_instance(seed, 300);
        EXPECT_NEAR(trapezoid_area(roc_curve(in.probs, in.labels)), auc(in.probs, in.labels), 1e-12);
    }
}

TEST(Stats, MeanAndPopulationVariance) {
    const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
    const auto [m, var] = mean_and_variance(v);
    EXPECT_EQ(m, 2.5);
    EXPECT_EQ(var, 1.25);
}

// One question answered correctly 83% of the time; unseen test students make
// IRT a constant predictor.
Dataset constant_data() {
    std::vector<Row> rows;
    Rng rng(2);
    for (int s = 0; s < 100; ++s)
        for (int i = 0; i < 20; ++i)
            rows.push_back({"s" + std::to_string(s), i * 10, "question_response", "q", "k",
                            rng.bernoulli(0.83) ? "1" : "0"});
    return testing::load(rows, testing::manifest({}));
}

TEST(CrossValidate, ConstantPredictor) {
    const auto d = constant_data();
    ModelSpec spec;
    spec.base = BaseSpec::parse("irt");
    const auto report = cross_validate(d, spec, 5, 0);
    ASSERT_EQ(report.folds.size(), 5u);
    double positives = 0;
    for (const auto& log : d.students)
        for (const auto& ev : log.events)
            positives += *ev.correct;
    EXPECT_NEAR(report.mean_accuracy, positives / 2000.0, 1e-12);
    EXPECT_NEAR(report.mean_accuracy, 0.83, 0.02);
    for (const auto& f : report.folds) {
        ASSERT_TRUE(f.auc.has_value());
        EXPECT_EQ(*f.auc, 0.5);
        EXPECT_EQ(f.test_students, 20u);
        EXPECT_EQ(f.responses, 400u);
    }
    EXPECT_EQ(*report.mean_auc, 0.5);
    EXPECT_EQ(*report.var_auc, 0.0);
}

TEST(CrossValidate, DeterministicAndJobsIndependent) {
    GeneratorConfig g;
    g.students = 60;
    g.questions = 15;
    const auto synth = generate(g);
    ModelSpec spec;
    spec.base = BaseSpec::parse("best-lr");
    const auto a = cross_validate(synth.dataset, spec, 5, 3).to_json().dump();
    spec.fit.jobs = 4;
    const auto b = cross_validate(synth.dataset, spec, 5, 3).to_json().dump();
    EXPECT_EQ(a, b);
    EXPECT_NE(a, cross_validate(synth.dataset, spec, 5, 4).to_json().dump());
}

TEST(CrossValidate, ReportShape) {
    GeneratorConfig g;
    g.students = 50;
    g.questions = 12;
    const auto synth = generate(g);
    ModelSpec spec;
    spec.base = BaseSpec::parse("pfa");
    std::size_t predicted = 0;
    CVHooks hooks;
    hooks.on_predictions = [&](int, const ExampleSet& test, std::span<const double> probs) {
        EXPECT_EQ(test.size(), probs.size());
        predicted += probs.size();
    };
    const auto report = cross_validate(synth.dataset, spec, 5, 0, hooks);
    EXPECT_EQ(predicted, 600u);
    std::size_t bucketed = 0;
    for (const auto& b : report.buckets)
        bucketed += b.responses;
    EXPECT_EQ(bucketed, 600u);
    EXPECT_EQ(report.buckets.front().key, "0-10");
    EXPECT_GE(report.var_accuracy, 0.0);
    const auto j = report.to_json();
    EXPECT_EQ(j.at("folds").size(), 5u);
    EXPECT_NEAR(trapezoid_area(report.roc), *report.mean_auc, 0.05);
}

TEST(CrossValidate, TrainingNeverSeesTestStudents) {
    GeneratorConfig g;
    g.students = 40;
    g.questions = 10;
    const auto synth = generate(g);
    const auto folds = split_folds(synth.dataset, 4, 1);
    ModelSpec spec;
    spec.base = BaseSpec::parse("best-lr");
    CVHooks hooks;
    hooks.on_train_students = [&](int fold, std::span<const std::size_t> train) {
        for (auto s : train)
            EXPECT_NE(folds.fold(synth.dataset.names.students.name(synth.dataset.students[s].student)), fold);
    };
    cross_validate(synth.dataset, folds, spec, hooks);
}

TEST(DatasetStats, Examples) {
    std::vector<Row> rows;
    for (int i = 0; i < 5; ++i)
        rows.push_back({"a", i, "question_response", "q" + std::to_string(i), "k", i % 2 ? "1" : "0"});
    const auto st = dataset_stats(testing::load(rows, testing::manifest({})));
    EXPECT_EQ(st.responses_per_student, (std::map<std::size_t, std::size_t>{{5, 1}}));
    EXPECT_EQ(st.correctness, 0.4);
    EXPECT_EQ(st.next_question_predictability, 1.0);

    rows.clear();
    for (int s = 0; s < 3; ++s)
        for (int i = 0; i < 4; ++i)
            rows.push_back({"s" + std::to_string(s), i, "question_response", "q" + std::to_string(i), "k", "1"});
    EXPECT_EQ(dataset_stats(testing::load(rows, testing::manifest({}))).next_question_predictability, 1.0);
}

TEST(DatasetStats, ModalSuccessorOracle) {
    Rng rng(9);
    std::vector<Row> rows;
    for (int s = 0; s < 30; ++s) {
        const int n = 2 + static_cast<int>(rng.below(15));
        for (int i = 0; i < n; ++i) {
            const auto q = rng.below(6);
            rows.push_back({"s" + std::to_string(s), i, "question_response", "q" + std::to_string(q),
                            "k" + std::to_string(q % 3), rng.bernoulli(0.6) ? "1" : "0"});
        }
    }
    const auto d = testing::load(rows, testing::manifest({}));
    std::vector<std::pair<std::string, std::string>> qpairs, kpairs;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].student == rows[i - 1].student) {
            qpairs.emplace_back(rows[i - 1].question, rows[i].question);
            kpairs.emplace_back(rows[i - 1].kcs, rows[i].kcs);
        }
    auto modal = [](const std::vector<std::pair<std::string, std::string>>& pairs) {
        std::map<std::string, std::size_t> best;
        for (const auto& [from, to] : pairs) {
            const auto c = static_cast<std::size_t>(std::count(pairs.begin(), pairs.end(), std::make_pair(from, to)));
            best[from] = std::max(best[from], c);
        }
        std::size_t hits = 0;
        for (const auto& [from, c] : best)
            hits += c;
        return static_cast<double>(hits) / static_cast<double>(pairs.size());
    };
    const auto st = dataset_stats(d);
    EXPECT_EQ(st.successor_pairs, qpairs.size());
    EXPECT_NEAR(st.next_question_predictability, modal(qpairs), 1e-15);
    EXPECT_NEAR(st.next_kc_predictability, modal(kpairs), 1e-15);
}

}// namespace
}// namespace ktrace
