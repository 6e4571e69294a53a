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
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include <ktrace/random.hpp>
#include <ktrace/regression.hpp>

#include "helpers.hpp"
#include "oracles.hpp"

namespace ktrace {
namespace {

SparseVector unit(std::initializer_list<std::uint32_t> idx) {
    std::vector<SparseEntry> e;
    for (auto i : idx)
        e.push_back({i, 1.0});
    return SparseVector::from_entries(e);
}

struct Batch {
    std::vector<SparseVector> phi;
    std::vector<std::uint8_t> labels;
};

Batch random_batch(Rng& rng, std::size_t n, std::uint32_t dim, bool with_bias = true) {
    Batch b;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<SparseEntry> e;
        if (with_bias)
            e.push_back({0, 1.0});
        for (std::uint32_t j = with_bias ? 1 : 0; j < dim; ++j)
            if (rng.bernoulli(0.2))
                e.push_back({j, rng.normal()});
        b.phi.push_back(SparseVector::from_entries(e));
        b.labels.push_back(rng.bernoulli(0.4) ? 1 : 0);
    }
    return b;
}

TEST(Sigmoid, Values) {
    EXPECT_EQ(sigmoid(0.0), 0.5);
    EXPECT_NEAR(sigmoid(std::log(3.0)), 0.75, 1e-15);
    const double tiny = sigmoid(-40.0);
    EXPECT_GT(tiny, 0.0);
    EXPECT_LT(tiny, 1e-15);
    EXPECT_NEAR(tiny / 4.248354255291589e-18, 1.0, 1e-12);
    EXPECT_GT(sigmoid(-700.0), 0.0);
    EXPECT_LT(sigmoid(700.0), 1.0);
    EXPECT_TRUE(std::isfinite(log_loss_from_logit(-700.0, true)));
    EXPECT_NEAR(log_loss_from_logit(0.0, true), std::log(2.0), 1e-15);
}

TEST(Model, ZeroWeightsGiveHalf) {
    const Model m(Recipe{}, "x", std::vector<double>(4, 0.0), {});
    EXPECT_EQ(m.predict_proba(unit({0, 3})), 0.5);
    EXPECT_THROW(m.predict_proba(unit({4})), std::out_of_range);
}

TEST(Gradient, SingleExampleClosedForm) {
    const std::vector<SparseVector> phi = {unit({0, 2})};
    const std::vector<std::uint8_t> y = {1};
    const std::vector<double> w(3, 0.0);
    const auto r = nll_and_gradient(phi, y, w, 0.0);
    EXPECT_NEAR(r.nll, std::log(2.0), 1e-15);
    EXPECT_EQ(r.gradient, (std::vector<double>{-0.5, 0.0, -0.5}));
}

TEST(Gradient, ZeroWhenLabelsMatchProbabilities) {
    // Two copies of one example with opposite labels: p = 0.5 is the optimum.
    const std::vector<SparseVector> phi = {unit({0}), unit({0})};
    const std::vector<std::uint8_t> y = {1, 0};
    const auto r = nll_and_gradient(phi, y, std::vector<double>{0.0}, 0.0);
    EXPECT_EQ(r.gradient[0], 0.0);
}

TEST(Gradient, PenaltySkipsUnpenalized) {
    const std::vector<SparseVector> phi = {SparseVector{}};
    const std::vector<std::uint8_t> y = {1};
    const std::vector<double> w = {2.0, 3.0};
    const std::vector<std::uint32_t> bias = {0};
    const auto r = nll_and_gradient(phi, y, w, 0.5, bias);
    EXPECT_NEAR(r.nll, std::log(2.0) + 0.25 * 9.0, 1e-12);
    EXPECT_EQ(r.gradient[0], 0.0);
    EXPECT_EQ(r.gradient[1], 1.5);
}

TEST(Gradient, MatchesFiniteDifferences) {
    Rng rng(100);
    for (int trial = 0; trial < 20; ++trial) {
        auto b = random_batch(rng, 150, 100);
        std::vector<double> w(100);
        for (auto& x : w)
            x = 0.5 * rng.normal();
        const std::vector<std::uint32_t> bias = {0};
        EXPECT_LT(testing::gradient_relative_error(b.phi, b.labels, w, 0.01, bias), 1e-6);
    }
}

TEST(Gradient, IndependentOfJobs) {
    Rng rng(3);
    auto b = random_batch(rng, 5000, 30);
    std::vector<double> w(30, 0.1);
    const auto a = nll_and_gradient(b.phi, b.labels, w, 0.1, {}, 1);
    const auto c = nll_and_gradient(b.phi, b.labels, w, 0.1, {}, 3);
    EXPECT_EQ(a.nll, c.nll);
    EXPECT_EQ(a.gradient, c.gradient);
}

TEST(Fit, SeparablePoints) {
    const std::vector<SparseVector> phi = {SparseVector::from_entries({{0, 1.0}, {1, 1.0}}),
                                           SparseVector::from_entries({{0, 1.0}, {1, -1.0}})};
    const std::vector<std::uint8_t> y = {1, 0};
    TrainConfig cfg;
    cfg.l2 = 1e-4;
    const std::vector<std::uint32_t> bias = {0};
    const auto fit = fit_logistic(phi, y, 2, bias, cfg);
    const Model m(Recipe{}, "", fit.weights, fit.metadata);
    EXPECT_GT(m.predict_proba(phi[0]), 0.5);
    EXPECT_LT(m.predict_proba(phi[1]), 0.5);
}

TEST(Fit, InterceptOnlyRecoversRate) {
    std::vector<SparseVector> phi(1000, unit({0}));
    std::vector<std::uint8_t> y(1000, 0);
    std::fill(y.begin(), y.begin() + 700, 1);
    const std::vector<std::uint32_t> bias = {0};
    const auto fit = fit_logistic(phi, y, 1, bias, TrainConfig{});
    EXPECT_NEAR(sigmoid(fit.weights[0]), 0.7, 1e-3);
    EXPECT_TRUE(fit.metadata.converged);
}

TEST(Fit, BitIdenticalReruns) {
    Rng rng(55);
    auto b = random_batch(rng, 3000, 40);
    const std::vector<std::uint32_t> bias = {0};
    TrainConfig one;
    TrainConfig four;
    four.jobs = 4;
    const auto a = fit_logistic(b.phi, b.labels, 40, bias, one);
    const auto c = fit_logistic(b.phi, b.labels, 40, bias, one);
    const auto d = fit_logistic(b.phi, b.labels, 40, bias, four);
    EXPECT_EQ(a.weights, c.weights);
    EXPECT_EQ(a.weights, d.weights);
    EXPECT_EQ(a.metadata.final_nll, d.metadata.final_nll);
}

TEST(Fit, StartingPointDoesNotMatterWithPenalty) {
    Rng rng(77);
    auto b = random_batch(rng, 2000, 20);
    const std::vector<std::uint32_t> bias = {0};
    TrainConfig cfg;
    cfg.l2 = 1.0;
    cfg.tolerance = 1e-12;
    cfg.max_epochs = 5000;
    const auto a = fit_logistic(b.phi, b.labels, 20, bias, cfg);
    std::vector<double> start(20);
    for (auto& x : start)
        x = 2.0 * rng.normal();
    cfg.initial_weights = start;
    const auto c = fit_logistic(b.phi, b.labels, 20, bias, cfg);
    EXPECT_NEAR(a.metadata.final_nll, c.metadata.final_nll, 1e-6);
}

TEST(Fit, LossNeverIncreases) {
    Rng rng(13);
    auto b = random_batch(rng, 1000, 25);
    const std::vector<std::uint32_t> bias = {0};
    double previous = std::numeric_limits<double>::infinity();
    for (int epochs = 1; epochs <= 30; ++epochs) {
        TrainConfig cfg;
        cfg.max_epochs = epochs;
        cfg.tolerance = 1e-300;
        const auto fit = fit_logistic(b.phi, b.labels, 25, bias, cfg);
        EXPECT_LE(fit.metadata.final_nll, previous);
        previous = fit.metadata.final_nll;
    }
}

TEST(Fit, RejectsBadInput) {
    const std::vector<SparseVector> phi = {unit({0})};
    const std::vector<std::uint8_t> two = {1, 0};
    EXPECT_THROW(fit_logistic(phi, two, 1, {}, TrainConfig{}), ArgumentError);
    EXPECT_THROW(fit_logistic({}, {}, 1, {}, TrainConfig{}), ArgumentError);
    TrainConfig bad;
    bad.l2 = -1.0;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Fit, DivergenceIsReported) {
    const std::vector<SparseVector> phi = {SparseVector::from_entries({{0, 1e308}})};
    const std::vector<std::uint8_t> y = {1};
    TrainConfig cfg;
    cfg.initial_weights = std::vector<double>{1e308};
    EXPECT_THROW(fit_logistic(phi, y, 1, {}, cfg), TrainingDivergence);
}

TEST(ModelJson, RoundTrip) {
    Rng rng(9);
    auto b = random_batch(rng, 500, 12);
    const std::vector<std::uint32_t> bias = {0};
    const auto fit = fit_logistic(b.phi, b.labels, 12, bias, TrainConfig{});
    Recipe r;
    r.families = {FeatureFamily::of(FamilyKind::Bias)};
    const Model m(r, "abc", fit.weights, fit.metadata);
    const auto back = Model::from_json(Json::parse(m.to_json().dump()));
    EXPECT_TRUE(back == m);
    EXPECT_EQ(back.weights(), m.weights());
}

TEST(TrainModel, DigestTiesModelToEncoder) {
    const auto d = testing::load({{"a", 1, "question_response", "q1", "k", "1"},
                                  {"a", 2, "question_response", "q2", "k", "0"}},
                                 testing::manifest({}));
    Recipe r;
    r.families = {FeatureFamily::of(FamilyKind::Bias), FeatureFamily::of(FamilyKind::QuestionOneHot)};
    const std::vector<std::size_t> students = {0};
    const auto enc = Encoder::fit(d, students, r);
    const auto m = train_model(enc, d.names, extract_examples(d, students, enc), TrainConfig{});
    EXPECT_EQ(m.encoder_digest(), encoder_digest(enc, d.names));
    EXPECT_EQ(m.dimension(), 3u);
    EXPECT_EQ(m.encoder_digest().size(), 16u);
}

}// namespace
}// namespace ktrace
