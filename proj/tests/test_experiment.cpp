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
#include <string>

#include <nlohmann/json.hpp>

#include "dmlp/experiment.hpp"
#include "test_support.hpp"

namespace dmlp {
namespace {

using testing::TempDir;

ExperimentConfig small_synthetic() {
  ExperimentConfig c;
  c.source = DataSource::LinearTeacher;
  c.synthetic_n_train = 200;
  c.synthetic_n_test = 100;
  c.synthetic_n_features = 12;
  c.synthetic_seed = 3;
  c.m = 4;
  c.hidden_neurons_centralized = 12;
  c.learning_rate = 0.5;
  c.T = 100;
  c.seeds = {1};
  c.trials = 1;
  return c;
}

TEST(RunDistributed, SingleNodeMatchesCentralizedExactly) {
  auto c = small_synthetic();
  c.m = 1;
  c.T = 50;
  c.stop_tol = 0.0;
  for (double overlap : {0.0, 1.0}) {
    c.overlap_ratio = overlap;
    const auto ds = prepare_dataset(c);
    const auto cent = run_centralized(c, ds, 11);
    const auto dist = run_distributed(c, ds, 11, nullptr);
    EXPECT_EQ(dist.rounds, cent.iterations);
    EXPECT_EQ(dist.nodes[0].model, cent.model);
    EXPECT_EQ(dist.theta(), cent.auc.theta);
  }
}

TEST(RunCentralized, ZeroLearningRateKeepsInitialization) {
  auto c = small_synthetic();
  c.learning_rate = 0.0;
  const auto ds = prepare_dataset(c);
  const auto res = run_centralized(c, ds, 5);
  EXPECT_EQ(res.iterations, 1u);
  EXPECT_TRUE(res.converged);
  const std::size_t hidden[] = {c.hidden_neurons_centralized};
  EXPECT_EQ(res.model, init_model(make_layer_specs(12, hidden, c.hidden_activation),
                                  derive_seed(5, streams::kModel, 0)));
}

TEST(RunDistributed, SeparableDataReachesHighAuc) {
  auto c = small_synthetic();
  c.synthetic_n_train = 1000;
  const auto ds = prepare_dataset(c);
  const auto res = run_distributed(c, ds, 2, nullptr);
  EXPECT_LE(res.rounds, 100u);
  EXPECT_GE(res.theta(), 0.95);
  EXPECT_LT(res.ci.lower, res.theta());
}

TEST(RunDistributed, HiddenBudgetAndConvergenceTrace) {
  auto c = small_synthetic();
  c.m = 5;
  c.T = 10;
  const auto ds = prepare_dataset(c);
  const auto cent = run_centralized(c, ds, 1);
  const auto res = run_distributed(c, ds, 1, &cent);
  std::size_t total_hidden = 0;
  for (const auto& n : res.nodes) total_hidden += n.model.layers()[0].spec.out_units;
  EXPECT_LE(total_hidden, c.hidden_neurons_centralized);
  EXPECT_GE(total_hidden + c.m - 1, c.hidden_neurons_centralized);
  ASSERT_EQ(res.round_logs.size(), 10u);
  for (const auto& log : res.round_logs) {
    ASSERT_TRUE(log.convergence_metric.has_value());
    EXPECT_GE(*log.convergence_metric, 0.0);
  }
  const auto plain = run_distributed(c, ds, 1, nullptr);
  EXPECT_FALSE(plain.round_logs.front().convergence_metric.has_value());
}

TEST(RunDistributed, FreshPartitionPerSeed) {
  const auto c = small_synthetic();
  const auto ds = prepare_dataset(c);
  EXPECT_NE(run_distributed(c, ds, 1, nullptr).partition.assignments,
            run_distributed(c, ds, 2, nullptr).partition.assignments);
}

TEST(Summarize, ComparabilityFollowsTheInterval) {
  auto c = small_synthetic();
  c.seeds = {1, 2, 3};
  c.trials = 3;
  c.T = 30;
  const auto ds = prepare_dataset(c);
  const auto report = run_suite(c, ds);
  const auto& s = report.summary;
  EXPECT_TRUE(report.complete);
  const auto ci = hanley_mcneil_ci(s.theta_distributed.mean, ds.y_test.size());
  EXPECT_EQ(s.ci.lower, ci.lower);
  EXPECT_EQ(s.ci.upper, ci.upper);
  EXPECT_EQ(s.comparable,
            ci.lower <= s.theta_centralized.mean && s.theta_centralized.mean <= ci.upper);
}

TEST(RunSuite, OneSeedHasZeroSpread) {
  const auto c = small_synthetic();
  const auto ds = prepare_dataset(c);
  const auto report = run_suite(c, ds);
  EXPECT_EQ(report.summary.theta_distributed.sd, 0.0);
  EXPECT_EQ(report.summary.theta_centralized.sd, 0.0);
  EXPECT_EQ(report.summary.distributed_rounds.sd, 0.0);
}

TEST(RunSuite, ReportsAreByteIdenticalAcrossRunsAndParallelism) {
  auto c = small_synthetic();
  c.seeds = {4, 5};
  c.trials = 2;
  c.T = 20;
  const auto ds = prepare_dataset(c);
  TempDir a, b;
  SuiteOptions oa;
  oa.out_dir = a.path();
  SuiteOptions ob;
  ob.out_dir = b.path();
  ob.parallel_trials = 2;
  run_suite(c, ds, oa);
  run_suite(c, ds, ob);
  for (const char* f : {"report.json", "convergence.csv", "trials/4/rounds.csv",
                        "trials/5/predictions.csv", "trials/5/roc.csv"}) {
    ASSERT_TRUE(std::filesystem::exists(a.path() / f)) << f;
    EXPECT_EQ(testing::slurp(a.path() / f), testing::slurp(b.path() / f)) << f;
  }
  const auto j = nlohmann::json::parse(testing::slurp(a.path() / "report.json"));
  EXPECT_EQ(j["status"], "complete");
  EXPECT_EQ(j["trials"].size(), 2u);
}

TEST(RunSuite, FailureKeepsPartialResults) {
  auto c = small_synthetic();
  c.seeds = {1};
  c.trials = 1;
  c.learning_rate = 1e308;
  const auto ds = prepare_dataset(c);
  TempDir dir;
  SuiteOptions opt;
  opt.out_dir = dir.path();
  EXPECT_THROW(run_suite(c, ds, opt), DivergenceError);
  const auto j = nlohmann::json::parse(testing::slurp(dir.path() / "report.json"));
  EXPECT_EQ(j["status"], "aborted");
  EXPECT_NE(j["error"].get<std::string>().find("round"), std::string::npos);
}

TEST(SweepOverlap, OneRowPerRatio) {
  auto c = small_synthetic();
  c.T = 10;
  const auto ds = prepare_dataset(c);
  const std::vector<double> grid{0.0, 0.5, 1.0};
  const auto rows = sweep_overlap(c, ds, grid);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[2].overlap_ratio, 1.0);
  EXPECT_EQ(rows[1].thetas.size(), 1u);
  const auto csv = sweep_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

}  // namespace
}  // namespace dmlp
