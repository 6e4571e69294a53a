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
#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>

#include <ktrace/cli.hpp>
#include <ktrace/recipes.hpp>

#include "helpers.hpp"

namespace ktrace {
namespace {

namespace fs = std::filesystem;

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"ktrace"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Json read_json(const fs::path& p) { return Json::parse(slurp(p)); }

// synth followed by prepare, shared by the tests below.
class CliTest : public ::testing::Test {
  protected:
    void SetUp() override {
        ::unsetenv("KTRACE_JOBS");
        const auto raw = (dir.path() / "raw").string();
        ASSERT_EQ(run({"synth", "--out", raw, "--students", "60", "--questions", "15", "--seed", "3"}), 0);
        ASSERT_EQ(run({"prepare", "--input", raw + "/events.csv", "--manifest", raw + "/manifest.json", "--out",
                       prepared().string()}),
                  0);
    }
    void TearDown() override { ::unsetenv("KTRACE_JOBS"); }
    fs::path prepared() const { return dir.path() / "prep"; }

    testing::TempDir dir{"cli"};
};

TEST_F(CliTest, PrepareWritesDirectory) {
    for (const char* f : {"events.csv", "manifest.json", "kc_mapping.json", "folds.json", "quality.json",
                          "run_manifest.json"})
        EXPECT_TRUE(fs::exists(prepared() / f)) << f;
    const auto folds = FoldAssignment::from_json(read_json(prepared() / "folds.json"));
    EXPECT_EQ(folds.k, 5);
    EXPECT_EQ(folds.fold_of.size(), 60u);
    const auto run_manifest = read_json(prepared() / "run_manifest.json");
    EXPECT_EQ(run_manifest.at("command"), "prepare");
    EXPECT_EQ(run_manifest.at("command_line").at(1), "prepare");
    for (const auto& out : run_manifest.at("outputs"))
        EXPECT_TRUE(fs::exists(out.get<std::string>())) << out;
}

TEST_F(CliTest, PrepareRerunIsIdentical) {
    const auto raw = (dir.path() / "raw").string();
    const auto again = dir.path() / "prep2";
    ASSERT_EQ(run({"prepare", "--input", raw + "/events.csv", "--manifest", raw + "/manifest.json", "--out",
                   again.string()}),
              0);
    for (const char* f : {"events.csv", "manifest.json", "kc_mapping.json", "folds.json", "quality.json"})
        EXPECT_EQ(file_digest(prepared() / f), file_digest(again / f)) << f;
}

TEST_F(CliTest, CorruptRowFailsWithLineNumber) {
    const auto raw = dir.path() / "raw";
    auto text = slurp(raw / "events.csv");
    const auto second = text.find('\n', text.find('\n') + 1) + 1;
    const auto comma = text.find(',', second);
    text.replace(second, text.find(',', comma + 1) - second, "s00,notatime");
    std::ofstream(raw / "bad.csv", std::ios::binary) << text;
    ::testing::internal::CaptureStderr();
    const int code = run({"prepare", "--input", (raw / "bad.csv").string(), "--manifest",
                          (raw / "manifest.json").string(), "--out", (dir.path() / "bad").string()});
    const auto err = ::testing::internal::GetCapturedStderr();
    EXPECT_EQ(code, 1);
    EXPECT_NE(err.find("ktrace: error:"), std::string::npos) << err;
    EXPECT_NE(err.find("line 3"), std::string::npos) << err;
}

TEST_F(CliTest, TrainEvalWritesArtifacts) {
    const auto out = dir.path() / "run";
    ::testing::internal::CaptureStdout();
    ASSERT_EQ(run({"train-eval", "--data", prepared().string(), "--recipe", "best-lr", "--partition",
                   "response-index", "--out", out.string()}),
              0);
    EXPECT_NE(::testing::internal::GetCapturedStdout().find("auc"), std::string::npos);
    const auto report = read_json(out / "report.json");
    EXPECT_EQ(report.at("folds").size(), 5u);
    EXPECT_FALSE(report.at("buckets").empty());
    for (int k = 0; k < 5; ++k)
        EXPECT_TRUE(fs::exists(out / "models" / ("fold-" + std::to_string(k) + ".json"))) << k;
    EXPECT_EQ(slurp(out / "buckets.csv").substr(0, 30), "bucket,responses,accuracy,auc\n");
    EXPECT_EQ(slurp(out / "roc.csv").substr(0, 8), "fpr,tpr\n");
    const auto rm = read_json(out / "run_manifest.json");
    EXPECT_EQ(rm.at("command"), "train-eval");
    EXPECT_EQ(rm.at("input_digests").size(), 3u);
    for (const auto& o : rm.at("outputs"))
        EXPECT_TRUE(fs::exists(o.get<std::string>())) << o;
}

TEST_F(CliTest, ReportIndependentOfJobs) {
    const auto a = dir.path() / "a";
    const auto b = dir.path() / "b";
    ::testing::internal::CaptureStdout();
    ASSERT_EQ(run({"train-eval", "--data", prepared().string(), "--recipe", "pfa", "--out", a.string()}), 0);
    ASSERT_EQ(run({"train-eval", "--data", prepared().string(), "--recipe", "pfa", "--out", b.string(), "--jobs", "3"}),
              0);
    ::testing::internal::GetCapturedStdout();
    EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
    EXPECT_EQ(read_json(b / "run_manifest.json").at("jobs"), 3);
}

TEST_F(CliTest, ConfigFileFillsUnsetOptionsOnly) {
    const auto cfg = dir.path() / "cfg.json";
    std::ofstream(cfg) << R"({"recipe": "irt", "folds": 3, "jobs": 2})";
    const auto out = dir.path() / "run";
    ::testing::internal::CaptureStdout();
    ASSERT_EQ(run({"train-eval", "--data", prepared().string(), "--config", cfg.string(), "--recipe", "pfa", "--out",
                   out.string()}),
              0);
    ::testing::internal::GetCapturedStdout();
    const auto report = read_json(out / "report.json");
    EXPECT_EQ(report.at("folds").size(), 3u);
    EXPECT_EQ(report.at("spec").at("base"), "pfa");
    EXPECT_EQ(read_json(out / "run_manifest.json").at("jobs"), 2);
}

TEST_F(CliTest, JobsPrecedence) {
    const auto cfg = dir.path() / "jobs.json";
    std::ofstream(cfg) << R"({"jobs": 2})";
    EXPECT_EQ(resolve_jobs(std::nullopt), 1);
    EXPECT_EQ(resolve_jobs(std::nullopt, cfg), 2);
    ::setenv("KTRACE_JOBS", "3", 1);
    EXPECT_EQ(resolve_jobs(std::nullopt, cfg), 3);
    EXPECT_EQ(resolve_jobs(4, cfg), 4);
    ::setenv("KTRACE_JOBS", "many", 1);
    EXPECT_THROW(resolve_jobs(std::nullopt), ConfigError);
}

TEST_F(CliTest, ResolutionErrorBeforeTraining) {
    TrainEvalOptions options;
    options.data = prepared();
    options.recipe = "best-lr|reading_counts";
    options.out = dir.path() / "never";
    EXPECT_THROW(cmd_train_eval(options), ResolutionError);
    EXPECT_FALSE(fs::exists(options.out));
    ::testing::internal::CaptureStderr();
    EXPECT_EQ(run({"train-eval", "--data", prepared().string(), "--recipe", "augmented-lr|hints", "--out",
                   options.out.string()}),
              1);
    ::testing::internal::GetCapturedStderr();
    EXPECT_FALSE(fs::exists(options.out));
}

TEST_F(CliTest, StatsOfPreparedDirectory) {
    const auto st = cmd_stats(prepared());
    EXPECT_EQ(st.students, 60u);
    EXPECT_EQ(st.responses, 900u);
    EXPECT_THROW(cmd_stats(prepared() / "events.csv"), ConfigError);
}

}// namespace
}// namespace ktrace
