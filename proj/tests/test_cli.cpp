/*
 * Copyright 2026 The DMLP Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "dmlp/cli.hpp"
#include "test_support.hpp"

namespace dmlp {
namespace {

using testing::TempDir;

struct Invocation {
  int code = -1;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "dmlp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Invocation r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

constexpr const char* kSmallConfig = R"([experiment]
name = "cli-test"
seeds = [1, 2]

[dataset]
source = "linear_teacher"
synthetic_n_train = 120
synthetic_n_test = 60
synthetic_n_features = 8

[network]
m = 2

[model]
hidden_neurons_centralized = 4

[training]
learning_rate = 0.3
T = 15
)";

TEST(Cli, RunWritesReportAndTrialFiles) {
  TempDir dir;
  const auto cfg = dir.write("exp.toml", kSmallConfig);
  const auto out = (dir.path() / "results").string();
  const auto r = invoke({"run", "--config", cfg, "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("theta_D"), std::string::npos);
  EXPECT_NE(r.out.find("comparable="), std::string::npos);
  for (const char* f : {"report.json", "convergence.csv", "trials/1/rounds.csv", "trials/2/roc.csv",
                        "trials/2/predictions.csv", "trials/1/centralized_loss.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "results" / f)) << f;
  }
}

TEST(Cli, IdenticalInvocationsGiveIdenticalReports) {
  TempDir dir;
  const auto cfg = dir.write("exp.toml", kSmallConfig);
  const auto a = (dir.path() / "a").string();
  const auto b = (dir.path() / "b").string();
  ASSERT_EQ(invoke({"run", "-c", cfg, "-o", a}).code, 0);
  ASSERT_EQ(invoke({"run", "-c", cfg, "-o", b, "--parallel-trials", "2"}).code, 0);
  EXPECT_EQ(testing::slurp(dir.path() / "a" / "report.json"),
            testing::slurp(dir.path() / "b" / "report.json"));
}

TEST(Cli, MissingConfigExitsOneNamingThePath) {
  const auto r = invoke({"run", "--config", "/nonexistent/missing.toml"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("/nonexistent/missing.toml"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(invoke({}).code, 1);
  EXPECT_EQ(invoke({"run"}).code, 1);
  EXPECT_EQ(invoke({"frobnicate", "-c", "x"}).code, 1);
}

TEST(Cli, BadOverrideNamesTheKey) {
  TempDir dir;
  const auto cfg = dir.write("exp.toml", kSmallConfig);
  const auto r = invoke({"validate-config", "-c", cfg, "--set", "training.learning_rate=abc"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("training.learning_rate"), std::string::npos) << r.err;
}

TEST(Cli, ValidateConfigHasNoSideEffects) {
  TempDir dir;
  const auto cfg = dir.write("exp.toml", kSmallConfig);
  const auto before = std::distance(std::filesystem::directory_iterator(dir.path()),
                                    std::filesystem::directory_iterator());
  const auto r = invoke({"validate-config", "-c", cfg});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("config OK"), std::string::npos);
  EXPECT_EQ(std::distance(std::filesystem::directory_iterator(dir.path()),
                          std::filesystem::directory_iterator()),
            before);
}

TEST(Cli, DivergenceExitsTwo) {
  TempDir dir;
  const auto cfg = dir.write("exp.toml", kSmallConfig);
  const auto r = invoke({"distributed", "-c", cfg, "-o", (dir.path() / "o").string(), "--set",
                         "training.learning_rate=1e308"});
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_NE(r.err.find("diverged"), std::string::npos);
}

TEST(Cli, SweepOverlapOneRowPerGridValue) {
  TempDir dir;
  const auto cfg = dir.write("exp.toml", kSmallConfig);
  const auto out = dir.path() / "sweep";
  const auto r = invoke({"sweep-overlap", "-c", cfg, "-o", out.string(), "--seed-list", "3",
                         "--grid", "0,0.5,1.0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = testing::slurp(out / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(invoke({"sweep-overlap", "-c", cfg, "-o", out.string(), "--grid", "0,1.5"}).code, 1);
}

TEST(Cli, CentralizedAndConvergenceSubcommands) {
  TempDir dir;
  const auto cfg = dir.write("exp.toml", kSmallConfig);
  const auto c = invoke({"centralized", "-c", cfg, "-o", (dir.path() / "c").string()});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "c" / "report.json"));
  const auto v = invoke({"convergence", "-c", cfg, "-o", (dir.path() / "v").string()});
  ASSERT_EQ(v.code, 0) << v.err;
  const auto csv = testing::slurp(dir.path() / "v" / "convergence.csv");
  EXPECT_EQ(csv.rfind("seed,round,convergence_metric\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 15);
}

}  // namespace
}  // namespace dmlp
