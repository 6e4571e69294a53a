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
#include <set>

#include <gtest/gtest.h>

#include <ktrace/eval.hpp>
#include <ktrace/random.hpp>
#include <ktrace/specialize.hpp>

#include "feature_oracle.hpp"

namespace ktrace {
namespace {

class Seeds : public ::testing::TestWithParam<std::uint64_t> {};

Recipe everything() {
    Recipe r;
    for (const auto& f : all_families())
        r.add(f);
    return r;
}

TEST_P(Seeds, FoldsPartitionStudents) {
    Rng rng(GetParam());
    const auto d = testing::random_rich_dataset(GetParam(), 10 + rng.below(60), 5);
    const int k = 2 + static_cast<int>(rng.below(6));
    const auto folds = split_folds(d, k, GetParam());
    std::multiset<std::size_t> seen;
    std::size_t smallest = d.students.size(), largest = 0;
    for (int f = 0; f < k; ++f) {
        const auto test = folds.test_students(d, f);
        const auto train = folds.train_students(d, f);
        EXPECT_EQ(test.size() + train.size(), d.students.size());
        seen.insert(test.begin(), test.end());
        smallest = std::min(smallest, test.size());
        largest = std::max(largest, test.size());
    }
    EXPECT_EQ(seen.size(), d.students.size());
    EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), d.students.size());
    EXPECT_LE(largest - smallest, 1u);
}

TEST_P(Seeds, ExamplesDoNotDependOnStudentOrder) {
    const auto d = testing::random_rich_dataset(GetParam(), 12, 40);
    std::vector<std::size_t> students(d.students.size());
    for (std::size_t i = 0; i < students.size(); ++i)
        students[i] = i;
    const auto enc = Encoder::fit(d, students, everything());
    const auto forward = extract_examples(d, students, enc, 1);
    std::reverse(students.begin(), students.end());
    const auto backward = extract_examples(d, students, enc, 3);
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::string> a, b;
    for (std::size_t i = 0; i < forward.size(); ++i)
        a[{forward.context[i].student_index, forward.context[i].response_index}] = forward.phi[i].to_json().dump();
    for (std::size_t i = 0; i < backward.size(); ++i)
        b[{backward.context[i].student_index, backward.context[i].response_index}] = backward.phi[i].to_json().dump();
    EXPECT_EQ(a, b);
}

TEST_P(Seeds, ModelJsonPreservesPredictions) {
    const auto d = testing::random_rich_dataset(GetParam(), 15, 30);
    std::vector<std::size_t> students(d.students.size());
    for (std::size_t i = 0; i < students.size(); ++i)
        students[i] = i;
    const auto base = fit_base(d, students, BaseSpec::parse("best-lr"), BaseFitOptions{});
    const auto ex = base.examples(d, students);
    const auto back = Model::from_json(Json::parse(base.model().to_json().dump()));
    for (const auto& phi : ex.phi)
        EXPECT_EQ(back.predict_proba(phi), base.model().predict_proba(phi));
}

TEST_P(Seeds, ProbabilitiesAndMetricsInRange) {
    const auto d = testing::random_rich_dataset(GetParam(), 25, 30);
    ModelSpec spec;
    spec.base = BaseSpec::parse("pfa");
    CVHooks hooks;
    hooks.on_predictions = [](int, const ExampleSet&, std::span<const double> probs) {
        for (double p : probs) {
            EXPECT_GT(p, 0.0);
            EXPECT_LT(p, 1.0);
        }
    };
    const auto report = cross_validate(d, spec, 3, GetParam(), hooks);
    EXPECT_GE(report.mean_accuracy, 0.0);
    EXPECT_LE(report.mean_accuracy, 1.0);
    EXPECT_GE(report.var_accuracy, 0.0);
    for (const auto& f : report.folds)
        if (f.auc) {
            EXPECT_GE(*f.auc, 0.0);
            EXPECT_LE(*f.auc, 1.0);
        }
}

INSTANTIATE_TEST_SUITE_P(Random, Seeds, ::testing::Range<std::uint64_t>(1, 9));

}// namespace
}// namespace ktrace
