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
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include <ktrace/cli.hpp>
#include <ktrace/combine.hpp>
#include <ktrace/eval.hpp>
#include <ktrace/random.hpp>
#include <ktrace/regression.hpp>
#include <ktrace/synth.hpp>

#include "feature_oracle.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

namespace ktrace {
namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
    Verdict verdict;
    std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Verdict::Pass : Verdict::Fail, std::move(detail)}; }

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

std::vector<std::size_t> every_student(const Dataset& d) {
    std::vector<std::size_t> out(d.students.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = i;
    return out;
}

double mean_auc(const Dataset& d, const std::string& base, std::uint64_t seed = 0) {
    ModelSpec spec;
    spec.base = BaseSpec::parse(base);
    return *cross_validate(d, spec, 5, seed).mean_auc;
}

// 1 ---------------------------------------------------------------------------

Outcome gradient_check() {
    Rng rng(2024);
    const auto families = all_families();
    double worst = 0.0;
    std::size_t largest = 0;
    for (int instance = 0; instance < 200; ++instance) {
        const auto d = testing::random_rich_dataset(1000 + instance, 4 + rng.below(12), 10 + rng.below(50));
        const auto students = every_student(d);
        Recipe recipe;
        recipe.pattern_length = 1 + static_cast<int>(rng.below(6));
        std::optional<Encoder> enc;
        do {
            recipe.families = {FeatureFamily::of(FamilyKind::Bias)};
            for (const auto& f : families)
                if (rng.bernoulli(0.25))
                    recipe.add(f);
            enc = Encoder::fit(d, students, recipe);
        } while (enc->dimension() > 500);
        const auto ex = extract_examples(d, students, *enc);
        std::vector<double> w(enc->dimension());
        for (auto& x : w)
            x = 0.3 * rng.normal();
        const double l2 = rng.bernoulli(0.5) ? 0.0 : rng.uniform();
        worst = std::max(worst, testing::gradient_relative_error(ex.phi, ex.labels, w, l2, enc->unpenalized()));
        largest = std::max<std::size_t>(largest, enc->dimension());
    }
    return verdict(worst < 1e-6, fmt("200 instances, max dimension %.0f, worst relative error %.3g", largest, worst));
}

// 2 ---------------------------------------------------------------------------

Outcome auc_check() {
    Rng rng(77);
    double worst = 0.0;
    for (int instance = 0; instance < 200; ++instance) {
        const std::size_t n = 2 + rng.below(1999);
        const std::uint64_t grid = instance == 0 ? 1 : 2 + rng.below(5000);
        std::vector<double> p(n);
        std::vector<std::uint8_t> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = static_cast<double>(rng.below(grid)) / static_cast<double>(grid);
            y[i] = rng.bernoulli(0.2 + 0.6 * p[i]);
        }
        if (instance == 1) {
            for (std::size_t i = 0; i < n; ++i)
                p[i] = static_cast<double>(i) / static_cast<double>(n);
            p[n - 1] = p[0];
        }
        y[0] = 0;
        y[n - 1] = 1;
        worst = std::max(worst, std::abs(auc(p, y) - testing::pairwise_auc(p, y)));
    }
    return verdict(worst <= 1e-12, fmt("200 instances up to 2000 responses, worst deviation %.3g", worst));
}

// 3 ---------------------------------------------------------------------------

Outcome feature_oracle_check() {
    const auto d = testing::random_rich_dataset(3, 100, 500);
    Recipe recipe;
    for (const auto& f : all_families())
        recipe.add(f);
    const auto students = every_student(d);
    const std::vector<std::size_t> train(students.begin(), students.begin() + 70);
    const auto enc = Encoder::fit(d, train, recipe);
    testing::OracleCheck check;
    for (auto s : students)
        testing::compare_student(enc, d, s, check);
    return verdict(check.mismatches == 0,
                   fmt("%.0f students, %.0f prefixes, %.0f families, %.0f mismatches", 100, check.examples,
                       recipe.families.size(), check.mismatches) +
                       (check.first_problem.empty() ? "" : "; " + check.first_problem.substr(0, 200)));
}

// 4 ---------------------------------------------------------------------------

constexpr double kPinnedBayes = 0.79446307475092437;

Outcome irt_recovery() {
    const auto r = generate(GeneratorConfig{});
    const double bayes = bayes_auc(r.dataset, r.truth);
    const double irt = mean_auc(r.dataset, "irt");
    return verdict(std::abs(bayes - kPinnedBayes) < 1e-12 && irt >= kPinnedBayes - 0.01,
                   fmt("IRT CV AUC %.4f, bayes %.4f, required >= %.4f", irt, bayes, kPinnedBayes - 0.01));
}

// 5 ---------------------------------------------------------------------------

GeneratorConfig long_histories() {
    GeneratorConfig g;
    g.students = 300;
    g.responses_per_student = 200;
    return g;
}

Outcome momentum_signal() {
    auto g = long_histories();
    g.momentum = 1.0;
    const auto r = generate(g);
    const double plain = mean_auc(r.dataset, "best-lr");
    const double plus = mean_auc(r.dataset, "best-lr+");
    g = long_histories();
    g.prerequisite_transfer = true;
    const auto t = generate(g);
    const double base = mean_auc(t.dataset, "best-lr");
    const double prereq = mean_auc(t.dataset, "best-lr|prereq_counts");
    return verdict(plus - plain >= 0.005 && prereq - base >= 0.005,
                   fmt("momentum: Best-LR+ %.4f vs Best-LR %.4f; transfer: +PrereqCounts %.4f vs Best-LR %.4f", plus,
                       plain, prereq, base));
}

// 6 ---------------------------------------------------------------------------

double bucket_auc(const MetricsReport& report, const std::string& key) {
    for (const auto& b : report.buckets)
        if (b.key == key && b.auc)
            return *b.auc;
    return 0.0;
}

Outcome cold_start() {
    auto g = long_histories();
    g.regime_change_step = 50;
    const auto r = generate(g);
    ModelSpec spec;
    spec.base = BaseSpec::parse("irt");
    const double fallback = bucket_auc(cross_validate(r.dataset, spec, 5, 0), "0-10");
    spec.base = BaseSpec::parse("irt@response-index");
    const double partitioned = bucket_auc(cross_validate(r.dataset, spec, 5, 0), "0-10");
    return verdict(partitioned - fallback >= 0.005,
                   fmt("0-10 bucket AUC: partitioned %.4f vs fallback %.4f", partitioned, fallback));
}

// 7 ---------------------------------------------------------------------------

Outcome stacking() {
    auto g = long_histories();
    g.momentum = 1.0;
    g.prerequisite_transfer = true;
    const auto r = generate(g);
    const double a = mean_auc(r.dataset, "best-lr+");
    const double b = mean_auc(r.dataset, "best-lr|prereq_counts");
    ModelSpec spec;
    spec.combine = {BaseSpec::parse("best-lr+"), BaseSpec::parse("best-lr|prereq_counts")};
    const double combined = *cross_validate(r.dataset, spec, 5, 0).mean_auc;

    const auto folds = split_folds(r.dataset, 5, 0);
    const auto train = folds.train_students(r.dataset, 0);
    const auto test = folds.test_students(r.dataset, 0);
    const auto single_spec = BaseSpec::parse("best-lr");
    const auto single = fit_base(r.dataset, train, single_spec, BaseFitOptions{});
    const auto dup = fit_combined(r.dataset, train, {single_spec, single_spec}, BaseFitOptions{}, CombineConfig{});
    const auto labels = single.examples(r.dataset, test).labels;
    const double gap = std::abs(auc(dup.predict(r.dataset, test), labels) - auc(single.predict(r.dataset, test), labels));
    return verdict(combined >= std::max(a, b) - 0.002 && gap <= 1e-6,
                   fmt("combined %.4f vs bases %.4f / %.4f; duplicated-base gap %.3g", combined, a, b, gap));
}

// 8 ---------------------------------------------------------------------------

Outcome determinism() {
    testing::TempDir dir("acceptance");
    auto g = long_histories();
    g.students = 120;
    g.momentum = 1.0;
    cmd_synth(g, dir.path() / "raw");
    PrepareOptions prep;
    prep.input = dir.path() / "raw" / "events.csv";
    prep.manifest = dir.path() / "raw" / "manifest.json";
    prep.out = dir.path() / "prep";
    cmd_prepare(prep);
    auto report_bytes = [&](int jobs) {
        TrainEvalOptions te;
        te.data = prep.out;
        te.recipe = "best-lr+";
        te.partition = "response-index";
        te.jobs = jobs;
        te.out = dir.path() / ("jobs" + std::to_string(jobs));
        cmd_train_eval(te);
        std::ifstream in(te.out / "report.json", std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    const auto one = report_bytes(1);
    const auto four = report_bytes(4);
    return verdict(!one.empty() && one == four, fmt("report.json %.0f bytes, --jobs 1 vs --jobs 4", one.size()));
}

// 9 ---------------------------------------------------------------------------

Outcome junyi() {
    const char* dir = std::getenv("KTRACE_JUNYI15");
    if (!dir || !*dir)
        return {Verdict::Skip, "set KTRACE_JUNYI15 to a prepared Junyi15 directory to run"};
    TrainEvalOptions te;
    te.data = dir;
    te.out = std::filesystem::temp_directory_path() / "ktrace-junyi";
    te.recipe = "best-lr";
    const double plain = *cmd_train_eval(te).mean_auc;
    te.recipe = "best-lr+";
    const double plus = *cmd_train_eval(te).mean_auc;
    return verdict(std::abs(plain - 0.762) <= 0.010 && std::abs(plus - 0.789) <= 0.010,
                   fmt("Best-LR %.4f (0.762 +- 0.010), Best-LR+ %.4f (0.789 +- 0.010)", plain, plus));
}

}// namespace
}// namespace ktrace

int main() {
    using namespace ktrace;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gradient matches finite differences", gradient_check},
        {"rank AUC matches pairwise counting", auc_check},
        {"feature values match brute-force recount", feature_oracle_check},
        {"IRT recovers the generating model", irt_recovery},
        {"history features detect their signal", momentum_signal},
        {"time partitions help cold start", cold_start},
        {"stacking keeps the best base", stacking},
        {"reports independent of --jobs", determinism},
        {"Junyi15 reproduction", junyi},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out = {Verdict::Fail, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const char* tag = out.verdict == Verdict::Pass ? "PASS" : out.verdict == Verdict::Fail ? "FAIL" : "SKIP";
        failures += out.verdict == Verdict::Fail;
        std::printf("[%s] %zu %s: %s (%.1fs)\n", tag, i + 1, criteria[i].first.c_str(), out.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
