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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any selected criterion fails.
//
//   dmlp_acceptance [--only N]... [--work-dir DIR]
//
// Criterion 6 uses the NIPS 2003 Madelon files when DMLP_MADELON_DIR points
// at a folder holding madelon_train.{data,labels} and
// madelon_valid.{data,labels}; otherwise it runs on the generated
// Madelon-like data described by configs/madelon_like.toml.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmlp/dmlp.hpp"
#include "oracles.hpp"

#ifndef DMLP_SOURCE_DIR
#error "DMLP_SOURCE_DIR must be defined"
#endif
#ifndef DMLP_CLI_PATH
#error "DMLP_CLI_PATH must be defined"
#endif

namespace fs = std::filesystem;
using namespace dmlp;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

fs::path config_path(const char* name) { return fs::path(DMLP_SOURCE_DIR) / "configs" / name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1. Backprop against central finite differences, every activation/loss pair.
Outcome gradient_oracle() {
  constexpr int kPerCombination = 13;
  Rng rng(20240101);
  int checked = 0, failed = 0;
  double worst = 0.0;
  for (auto act : {ActivationKind::Sigmoid, ActivationKind::Relu, ActivationKind::Tanh,
                   ActivationKind::Linear}) {
    for (auto loss : {LossKind::SquaredError, LossKind::CrossEntropy}) {
      int done = 0;
      while (done < kPerCombination) {
        const auto net = oracle::random_net(rng, act);
        if (oracle::near_relu_kink(net)) continue;
        std::vector<double> neighbor(net.x.rows());
        for (double& v : neighbor) v = rng.uniform(0.05, 0.95);
        for (const auto& check :
             {oracle::check_local_gradient(net, loss),
              oracle::check_gossip_gradient(net, loss, neighbor)}) {
          worst = std::max(worst, check.worst_excess);
          if (!check.ok) ++failed;
        }
        ++done;
        ++checked;
      }
    }
  }
  return {failed == 0, std::to_string(checked) + " nets, " + std::to_string(failed) +
                           " mismatches, worst error/tolerance " + fmt(worst)};
}

// 2. Rank-based AUC against the O(n^2) pair count.
Outcome auc_oracle() {
  Rng rng(777);
  double worst = 0.0;
  constexpr int kInstances = 1000;
  for (int t = 0; t < kInstances; ++t) {
    const std::size_t n = 2 + rng.index(199);
    const std::size_t levels = 1 + rng.index(20);  // few levels means many ties
    std::vector<double> y(n), s(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.uniform01() < 0.5 ? 1.0 : 0.0;
      s[i] = static_cast<double>(rng.index(levels)) / static_cast<double>(levels);
    }
    // Force both classes at two distinct random positions.
    const std::size_t pos = rng.index(n);
    y[pos] = 1.0;
    y[(pos + 1 + rng.index(n - 1)) % n] = 0.0;
    worst = std::max(worst, std::abs(roc_auc(y, s).theta - oracle::brute_force_auc(y, s)));
  }
  return {worst <= 1e-12, std::to_string(kInstances) + " instances, max |diff| " + fmt(worst)};
}

// 3. Published Hanley-McNeil intervals.
Outcome hanley_mcneil() {
  struct Row {
    double theta;
    std::size_t n;
    double lower, upper;
  };
  bool ok = true;
  std::string detail;
  for (const Row& r : {Row{0.92, 100, 0.88, 0.96}, Row{0.63, 600, 0.60, 0.66}}) {
    const auto ci = hanley_mcneil_ci(r.theta, r.n);
    ok = ok && std::abs(ci.lower - r.lower) <= 0.005 && std::abs(ci.upper - r.upper) <= 0.005;
    detail += "(" + fmt(r.theta) + ", " + std::to_string(r.n) + ") -> [" + fmt(ci.lower) + ", " +
              fmt(ci.upper) + "]  ";
  }
  return {ok, detail};
}

// 4. One node holding every feature is the centralized trainer.
Outcome centralized_reduction() {
  auto cfg = load_config(config_path("synthetic_linear.toml").string(),
                         {"network.m=1", "training.T=50", "training.stop_tol=0"});
  const auto ds = prepare_dataset(cfg);
  double worst = 0.0;
  std::size_t rounds = 0;
  for (double overlap : {0.0, 1.0}) {
    cfg.overlap_ratio = overlap;
    const auto cent = run_centralized(cfg, ds, 1);
    const auto dist = run_distributed(cfg, ds, 1, nullptr);
    rounds = dist.rounds;
    const auto a = cent.model.flatten();
    const auto b = dist.nodes.at(0).model.flatten();
    if (a.size() != b.size() || cent.iterations != dist.rounds) return {false, "shape or round mismatch"};
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return {worst <= 1e-12 && rounds == 50,
          std::to_string(rounds) + " rounds, max |w_D - w_C| " + fmt(worst)};
}

// 5. Nodes that already predict the labels do not move.
Outcome fixed_point() {
  // Both features carry the label's sign; each node sees one of them.
  Dataset ds;
  const std::vector<double> sign{-1, 1, 1, -1, 1, -1, -1, 1};
  ds.x_train = Matrix(sign.size(), 2);
  for (std::size_t r = 0; r < sign.size(); ++r) {
    ds.x_train(r, 0) = sign[r];
    ds.x_train(r, 1) = 2.0 * sign[r];
    ds.y_train.push_back(sign[r] > 0 ? 1.0 : 0.0);
  }
  const auto part = make_partition(2, 2, {0.0}, 1);
  double worst = 0.0;
  for (auto loss : {LossKind::CrossEntropy, LossKind::SquaredError}) {
    std::vector<Matrix> data;
    std::vector<MlpModel> models;
    const std::size_t hidden[] = {1};
    for (std::size_t i = 0; i < 2; ++i) {
      data.push_back(ds.x_train.select_columns(part.assignments[i]));
      MlpModel m(make_layer_specs(1, hidden, ActivationKind::Relu));
      m.layers()[0].weights = {1.0 / std::abs(data[i](0, 0))};
      m.layers()[0].biases = {0.0};
      m.layers()[1].weights = {4000.0};
      m.layers()[1].biases = {-2000.0};
      models.push_back(m);
    }
    auto nodes = init_nodes(models, part.assignments, data, ds.y_train, loss);
    TrainingConfig tc;
    tc.loss = loss;
    tc.learning_rate = 0.1;
    Rng rng(3);
    const auto topo = build_topology(TopologyKind::Complete, 2, 0);
    run_round(nodes, topo, data, ds.y_train, tc, rng, 1);
    for (std::size_t i = 0; i < 2; ++i) {
      const auto a = models[i].flatten();
      const auto b = nodes[i].model.flatten();
      for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
    }
  }
  return {worst <= 1e-12, "max weight change over one round " + fmt(worst)};
}

// 6. Madelon at desk scale.
Outcome madelon(const fs::path& work) {
  std::vector<std::string> overrides;
  std::string source = "generated Madelon-like data";
  if (const char* dir = std::getenv("DMLP_MADELON_DIR"); dir && *dir) {
    const fs::path d(dir);
    overrides = {"dataset.source=files",
                 "dataset.format=csv",
                 "dataset.label_rule=pm1",
                 "dataset.train_path=" + (d / "madelon_train.data").string(),
                 "dataset.train_labels_path=" + (d / "madelon_train.labels").string(),
                 "dataset.test_path=" + (d / "madelon_valid.data").string(),
                 "dataset.test_labels_path=" + (d / "madelon_valid.labels").string()};
    source = "Madelon files in " + d.string();
  }
  const auto cfg = load_config(config_path("madelon_like.toml").string(), overrides);
  cfg.validate();
  const auto ds = prepare_dataset(cfg);
  SuiteOptions opt;
  opt.out_dir = work / "criterion6";
  const auto report = run_suite(cfg, ds, opt);
  const auto& s = report.summary;
  const bool auc_ok = std::abs(s.theta_distributed.mean - 0.63) <= 0.08;
  return {auc_ok && s.comparable,
          source + ": theta_D " + fmt(s.theta_distributed.mean) + " +/- " +
              fmt(s.theta_distributed.sd) + " (|theta_D - 0.63| <= 0.08: " +
              (auc_ok ? "yes" : "no") + "), CI [" + fmt(s.ci.lower) + ", " + fmt(s.ci.upper) +
              "], theta_C " + fmt(s.theta_centralized.mean) + " (inside CI: " +
              (s.comparable ? "yes" : "no") + ")"};
}

int run_cli_run(const fs::path& out) {
  const std::string cmd = std::string("\"") + DMLP_CLI_PATH + "\" run -c \"" +
                          config_path("synthetic_linear.toml").string() + "\" -o \"" +
                          out.string() + "\" > \"" + (out.string() + ".log") + "\" 2>&1";
  fs::create_directories(out.parent_path());
  return std::system(cmd.c_str());
}

// 7. The centralized/distributed weight-norm gap shrinks over training.
Outcome convergence(const fs::path& work) {
  const auto out = work / "criterion7";
  if (run_cli_run(out) != 0) return {false, "dmlp run failed; see " + out.string() + ".log"};
  std::map<std::string, std::vector<double>> traces;
  std::istringstream csv(slurp(out / "convergence.csv"));
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    const auto a = line.find(',');
    const auto b = line.rfind(',');
    traces[line.substr(0, a)].push_back(std::stod(line.substr(b + 1)));
  }
  if (traces.empty()) return {false, "empty convergence trace"};
  bool ok = true;
  std::string detail;
  for (const auto& [seed, m] : traces) {
    const bool endpoint = m.back() < m.front();
    std::size_t rises = 0;
    std::vector<double> ma;
    for (std::size_t k = 0; k + 5 <= m.size(); ++k) {
      ma.push_back((m[k] + m[k + 1] + m[k + 2] + m[k + 3] + m[k + 4]) / 5.0);
    }
    for (std::size_t k = 1; k < ma.size(); ++k) rises += ma[k] > ma[k - 1] ? 1 : 0;
    ok = ok && endpoint && rises == 0 && !ma.empty();
    detail += "seed " + seed + ": round 1 " + fmt(m.front()) + " -> round " +
              std::to_string(m.size()) + " " + fmt(m.back()) + ", " + std::to_string(rises) +
              "/" + std::to_string(ma.empty() ? 0 : ma.size() - 1) + " moving-average rises; ";
  }
  return {ok, detail};
}

// 8. Sharing every feature does not hurt the consensus.
Outcome overlap_trend() {
  const auto cfg = load_config(config_path("synthetic_linear.toml").string());
  const auto ds = prepare_dataset(cfg);
  SuiteOptions opt;
  opt.with_centralized = false;
  const std::vector<double> grid{0.0, 1.0};
  const auto rows = sweep_overlap(cfg, ds, grid, opt);
  const double at0 = rows[0].theta_distributed.mean;
  const double at1 = rows[1].theta_distributed.mean;
  return {at1 >= at0, "mean theta_D over " + std::to_string(cfg.seeds.size()) +
                          " seeds: overlap 0 -> " + fmt(at0) + ", overlap 1 -> " + fmt(at1)};
}

// 9. Two identical `run` invocations give identical report.json bytes.
Outcome determinism(const fs::path& work) {
  const auto a = work / "criterion9" / "a";
  const auto b = work / "criterion9" / "b";
  if (run_cli_run(a) != 0 || run_cli_run(b) != 0) return {false, "dmlp run failed"};
  const auto ra = slurp(a / "report.json");
  const auto rb = slurp(b / "report.json");
  return {!ra.empty() && ra == rb,
          "report.json " + std::to_string(ra.size()) + " bytes, identical: " +
              (ra == rb ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string work_dir = (fs::temp_directory_path() / "dmlp_acceptance").string();
  app.add_option("--only", only, "Run only these criteria (1-9)")->check(CLI::Range(1, 9));
  app.add_option("--work-dir", work_dir, "Scratch directory for run artifacts")
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const fs::path work(work_dir);
  fs::create_directories(work);
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient oracle", gradient_oracle},
      {2, "AUC oracle", auc_oracle},
      {3, "Hanley-McNeil intervals", hanley_mcneil},
      {4, "centralized reduction", centralized_reduction},
      {5, "gossip fixed point", fixed_point},
      {6, "Madelon reproduction", [&] { return madelon(work); }},
      {7, "convergence diagnostic", [&] { return convergence(work); }},
      {8, "overlap trend", overlap_trend},
      {9, "determinism", [&] { return determinism(work); }},
  };

  bool all = true;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all = all && o.pass;
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (o.pass ? "PASS" : "FAIL")
              << "  [" << fmt(secs) << " s] " << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
