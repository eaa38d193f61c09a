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

// Experiment orchestration: the centralized baseline, distributed trials,
// multi-seed aggregation, overlap sweeps and on-disk artifacts.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmlp/config.hpp"
#include "dmlp/data_plane.hpp"
#include "dmlp/errors.hpp"
#include "dmlp/format.hpp"
#include "dmlp/gossip_sim.hpp"
#include "dmlp/metrics.hpp"
#include "dmlp/nn_core.hpp"
#include "dmlp/rng.hpp"

namespace dmlp {

/// Loads (or generates) and scales the dataset a config describes.
inline Dataset prepare_dataset(const ExperimentConfig& cfg) {
  Dataset ds;
  switch (cfg.source) {
    case DataSource::Files: {
      LoadOptions opt;
      opt.format = cfg.format;
      opt.label_rule = parse_label_rule(cfg.label_rule);
      opt.label_column = cfg.label_column;
      opt.train_labels_path = cfg.train_labels_path;
      opt.test_labels_path = cfg.test_labels_path;
      opt.n_features = cfg.n_features;
      ds = load_dataset(cfg.train_path, cfg.test_path, opt);
      break;
    }
    case DataSource::LinearTeacher:
      ds = make_linear_teacher({cfg.synthetic_n_train, cfg.synthetic_n_test,
                                cfg.synthetic_n_features, cfg.synthetic_label_noise,
                                cfg.synthetic_seed});
      break;
    case DataSource::MadelonLike: {
      MadelonSpec spec;
      spec.n_train = cfg.synthetic_n_train;
      spec.n_test = cfg.synthetic_n_test;
      spec.seed = cfg.synthetic_seed;
      ds = make_madelon_like(spec);
      break;
    }
  }
  return scale_features(std::move(ds), cfg.scaling);
}

struct CentralizedResult {
  std::uint64_t seed = 0;
  MlpModel model;
  AucEstimate auc;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> loss_trace;
  std::vector<double> test_predictions;
};

/// Full-batch gradient descent on the full feature matrix, with the same
/// initialization stream, update rule and stopping rule as one isolated node.
inline CentralizedResult run_centralized(const ExperimentConfig& cfg, const Dataset& ds,
                                         std::uint64_t seed) {
  const TrainingConfig tc = cfg.training();
  tc.validate();
  const std::size_t hidden[] = {cfg.hidden_neurons_centralized};
  const auto specs = make_layer_specs(ds.n_features(), hidden, cfg.hidden_activation);

  CentralizedResult res;
  res.seed = seed;
  res.model = init_model(specs, derive_seed(seed, streams::kModel, 0));

  // A single isolated node is exactly the centralized trainer.
  std::vector<MlpModel> models{res.model};
  std::vector<std::size_t> all_columns(ds.n_features());
  for (std::size_t c = 0; c < all_columns.size(); ++c) all_columns[c] = c;
  const std::vector<std::vector<std::size_t>> assignment{all_columns};
  const std::span<const Matrix> data(&ds.x_train, 1);
  auto nodes = init_nodes(std::move(models), assignment, data, ds.y_train, tc.loss);
  const Topology solo = build_topology(TopologyKind::Complete, 1, seed);
  Rng rng(derive_seed(seed, streams::kGossip));

  for (std::size_t it = 1; it <= tc.max_rounds; ++it) {
    const auto log = run_round(nodes, solo, data, ds.y_train, tc, rng, it);
    res.iterations = it;
    res.loss_trace.push_back(log.mean_local_loss);
    if (log.max_weight_delta < tc.stop_tol) {
      res.converged = true;
      break;
    }
  }
  res.model = std::move(nodes[0].model);
  res.test_predictions = batch_predict(res.model, ds.x_test);
  res.auc = roc_auc(ds.y_test, res.test_predictions);
  return res;
}

struct TrialResult {
  std::uint64_t seed = 0;
  VerticalPartition partition;
  AucEstimate auc;
  ConfidenceInterval ci;
  std::size_t rounds = 0;
  bool converged = false;
  std::vector<RoundLog> round_logs;
  std::vector<double> test_predictions;
  std::vector<NodeState> nodes;
  std::optional<CentralizedResult> centralized;

  double theta() const { return auc.theta; }
};

/// One distributed trial. The feature split, node initializations and
/// neighbor draws all derive from `seed`. When `baseline` is given, each
/// round records the convergence metric of the node models against the
/// trained centralized model.
inline TrialResult run_distributed(const ExperimentConfig& cfg, const Dataset& ds,
                                   std::uint64_t seed,
                                   const CentralizedResult* baseline = nullptr) {
  const TrainingConfig tc = cfg.training();
  tc.validate();
  TrialResult res;
  res.seed = seed;
  res.partition = make_partition(ds.n_features(), cfg.m, OverlapSpec{cfg.overlap_ratio},
                                 derive_seed(seed, streams::kPartition));
  const Topology topo = build_topology(cfg.topology, cfg.m, seed, cfg.degree);

  std::vector<Matrix> train, test;
  std::vector<MlpModel> models;
  const std::size_t hidden[] = {cfg.hidden_per_node()};
  for (std::size_t i = 0; i < cfg.m; ++i) {
    auto local = project(ds, res.partition, i);
    const auto specs = make_layer_specs(local.train.cols(), hidden, cfg.hidden_activation);
    models.push_back(init_model(specs, derive_seed(seed, streams::kModel, i)));
    train.push_back(std::move(local.train));
    test.push_back(std::move(local.test));
  }
  auto nodes = init_nodes(std::move(models), res.partition.assignments, train, ds.y_train, tc.loss);
  Rng rng(derive_seed(seed, streams::kGossip));

  RoundObserver observer;
  if (baseline != nullptr) {
    observer = [baseline](std::size_t, const std::vector<NodeState>& ns) -> std::optional<double> {
      std::vector<const MlpModel*> models;
      for (const auto& n : ns) models.push_back(&n.model);
      return convergence_metric(baseline->model, models);
    };
    res.centralized = *baseline;
  }
  auto training = run_training(nodes, topo, train, ds.y_train, tc, rng, observer);
  res.round_logs = std::move(training.rounds);
  res.rounds = res.round_logs.size();
  res.converged = training.converged;
  res.test_predictions = distributed_predict(nodes, test);
  res.auc = roc_auc(ds.y_test, res.test_predictions);
  res.ci = hanley_mcneil_ci(res.auc.theta, ds.y_test.size());
  res.nodes = std::move(nodes);
  return res;
}

// ---------------------------------------------------------------------------
// Artifacts

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
}

inline std::string roc_csv(std::span<const double> y, std::span<const double> scores) {
  std::ostringstream out;
  out << "threshold,fpr,tpr\n";
  for (const auto& p : roc_curve(y, scores)) {
    out << format_double(p.threshold) << ',' << format_double(p.fpr) << ','
        << format_double(p.tpr) << '\n';
  }
  return out.str();
}

inline nlohmann::ordered_json mean_sd_json(const MeanSd& v) {
  return {{"mean", v.mean}, {"sd", v.sd}};
}

inline nlohmann::ordered_json ci_json(const ConfidenceInterval& ci) {
  return {{"lower", ci.lower}, {"upper", ci.upper}, {"se", ci.se}, {"level", ci.level}};
}

}  // namespace detail

/// Writes trials/<seed>/{rounds,roc,predictions}.csv for a distributed trial
/// and trials/<seed>/centralized_loss.csv when a baseline is attached.
inline void write_trial_artifacts(const std::filesystem::path& out_dir, const Dataset& ds,
                                  const TrialResult& t) {
  const auto dir = out_dir / "trials" / std::to_string(t.seed);
  std::ostringstream rounds;
  write_rounds_csv(rounds, t.round_logs);
  detail::write_file(dir / "rounds.csv", rounds.str());
  detail::write_file(dir / "roc.csv", detail::roc_csv(ds.y_test, t.test_predictions));
  std::ostringstream preds;
  preds << "label,distributed" << (t.centralized ? ",centralized" : "") << '\n';
  for (std::size_t r = 0; r < ds.y_test.size(); ++r) {
    preds << format_double(ds.y_test[r]) << ',' << format_double(t.test_predictions[r]);
    if (t.centralized) preds << ',' << format_double(t.centralized->test_predictions[r]);
    preds << '\n';
  }
  detail::write_file(dir / "predictions.csv", preds.str());
  if (t.centralized) {
    std::ostringstream loss;
    loss << "iteration,loss\n";
    for (std::size_t i = 0; i < t.centralized->loss_trace.size(); ++i) {
      loss << i + 1 << ',' << format_double(t.centralized->loss_trace[i]) << '\n';
    }
    detail::write_file(dir / "centralized_loss.csv", loss.str());
  }
}

inline std::string convergence_csv(std::span<const TrialResult> trials) {
  std::ostringstream out;
  out << "seed,round,convergence_metric\n";
  for (const auto& t : trials) {
    for (const auto& r : t.round_logs) {
      if (!r.convergence_metric) continue;
      out << t.seed << ',' << r.round << ',' << format_double(*r.convergence_metric) << '\n';
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Suites

struct SuiteSummary {
  MeanSd theta_centralized;
  MeanSd theta_distributed;
  ConfidenceInterval ci;
  MeanSd centralized_iterations;
  MeanSd distributed_rounds;
  bool comparable = false;
};

struct SuiteReport {
  std::vector<TrialResult> trials;
  SuiteSummary summary;
  bool complete = false;
  std::string error;
};

inline SuiteSummary summarize(std::span<const TrialResult> trials, std::size_t n_test) {
  SuiteSummary s;
  std::vector<double> td, tc, ic, id;
  for (const auto& t : trials) {
    td.push_back(t.theta());
    id.push_back(static_cast<double>(t.rounds));
    if (t.centralized) {
      tc.push_back(t.centralized->auc.theta);
      ic.push_back(static_cast<double>(t.centralized->iterations));
    }
  }
  s.theta_distributed = averaged_auc_over_trials(td);
  s.distributed_rounds = averaged_auc_over_trials(id);
  s.ci = hanley_mcneil_ci(s.theta_distributed.mean, n_test);
  if (!tc.empty()) {
    s.theta_centralized = averaged_auc_over_trials(tc);
    s.centralized_iterations = averaged_auc_over_trials(ic);
    s.comparable = comparable(s.theta_centralized.mean, s.ci);
  }
  return s;
}

/// Runs `job(seed)` for every seed with at most `parallel` in flight and
/// returns results in seed order.
template <typename Result>
std::vector<Result> run_trials(std::span<const std::uint64_t> seeds, std::size_t parallel,
                               const std::function<Result(std::uint64_t)>& job,
                               const std::function<void(const Result&)>& on_done = {}) {
  std::vector<Result> results;
  parallel = std::max<std::size_t>(1, parallel);
  for (std::size_t start = 0; start < seeds.size(); start += parallel) {
    const std::size_t end = std::min(seeds.size(), start + parallel);
    if (end - start == 1) {
      results.push_back(job(seeds[start]));
      if (on_done) on_done(results.back());
      continue;
    }
    std::vector<std::future<Result>> batch;
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(std::async(std::launch::async, job, seeds[i]));
    }
    for (auto& f : batch) {
      results.push_back(f.get());
      if (on_done) on_done(results.back());
    }
  }
  return results;
}

struct SuiteOptions {
  std::optional<std::filesystem::path> out_dir;
  std::size_t parallel_trials = 1;
  bool with_centralized = true;
  std::function<void(const std::string&)> progress;
};

inline nlohmann::ordered_json report_json(const ExperimentConfig& cfg, const Dataset& ds,
                                          const SuiteReport& report) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["name"] = cfg.name;
  j["status"] = report.complete ? "complete" : "aborted";
  if (!report.error.empty()) j["error"] = report.error;
  ordered_json config = ordered_json::object();
  for (const auto& [k, v] : cfg.source_values) config[k] = v;
  j["config"] = config;
  j["dataset"] = {{"n_train", ds.x_train.rows()},
                  {"n_test", ds.x_test.rows()},
                  {"n_features", ds.n_features()}};
  j["nodes"] = cfg.m;
  j["hidden_per_node"] = cfg.hidden_per_node();
  ordered_json trials = ordered_json::array();
  for (const auto& t : report.trials) {
    ordered_json row;
    row["seed"] = t.seed;
    row["theta_distributed"] = t.theta();
    row["ci"] = detail::ci_json(t.ci);
    row["distributed_rounds"] = t.rounds;
    row["distributed_converged"] = t.converged;
    if (t.centralized) {
      row["theta_centralized"] = t.centralized->auc.theta;
      row["centralized_iterations"] = t.centralized->iterations;
      row["centralized_converged"] = t.centralized->converged;
      row["comparable"] = comparable(t.centralized->auc.theta, t.ci);
    }
    trials.push_back(row);
  }
  j["trials"] = trials;
  if (!report.trials.empty()) {
    const auto& s = report.summary;
    ordered_json sum;
    sum["theta_distributed"] = detail::mean_sd_json(s.theta_distributed);
    sum["ci"] = detail::ci_json(s.ci);
    sum["distributed_rounds"] = detail::mean_sd_json(s.distributed_rounds);
    if (report.trials.front().centralized) {
      sum["theta_centralized"] = detail::mean_sd_json(s.theta_centralized);
      sum["centralized_iterations"] = detail::mean_sd_json(s.centralized_iterations);
      sum["comparable"] = s.comparable;
    }
    j["summary"] = sum;
  }
  return j;
}

/// Centralized and distributed runs for every seed, aggregated into one
/// table row. Per-trial artifacts are written as trials finish; if a trial
/// throws, the partial report is written before the error propagates.
inline SuiteReport run_suite(const ExperimentConfig& cfg, const Dataset& ds,
                             const SuiteOptions& opt = {}) {
  SuiteReport report;
  auto job = [&](std::uint64_t seed) {
    if (opt.progress) opt.progress("trial seed " + std::to_string(seed) + ": start");
    std::optional<CentralizedResult> base;
    if (opt.with_centralized) base = run_centralized(cfg, ds, seed);
    auto t = run_distributed(cfg, ds, seed, base ? &*base : nullptr);
    if (opt.progress) {
      opt.progress("trial seed " + std::to_string(seed) + ": theta_D=" + format_double(t.theta()) +
                   " rounds=" + std::to_string(t.rounds));
    }
    return t;
  };
  auto write_report = [&] {
    if (!opt.out_dir) return;
    detail::write_file(*opt.out_dir / "report.json", report_json(cfg, ds, report).dump(2) + "\n");
    if (opt.with_centralized) detail::write_file(*opt.out_dir / "convergence.csv", convergence_csv(report.trials));
  };
  std::vector<TrialResult> done;
  try {
    report.trials = run_trials<TrialResult>(
        cfg.seeds, opt.parallel_trials, job, [&](const TrialResult& t) {
          done.push_back(t);
          if (opt.out_dir) write_trial_artifacts(*opt.out_dir, ds, t);
        });
  } catch (const std::exception& e) {
    report.trials = std::move(done);
    report.error = e.what();
    if (!report.trials.empty()) report.summary = summarize(report.trials, ds.y_test.size());
    write_report();
    throw;
  }
  report.summary = summarize(report.trials, ds.y_test.size());
  report.complete = true;
  write_report();
  return report;
}

struct SweepRow {
  double overlap_ratio = 0.0;
  MeanSd theta_distributed;
  ConfidenceInterval ci;
  MeanSd theta_centralized;
  std::vector<double> thetas;
};

inline std::vector<double> default_overlap_grid() { return {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}; }

/// Distributed trials for every seed at each overlap ratio. The centralized
/// baseline does not depend on the overlap, so it runs once per seed.
inline std::vector<SweepRow> sweep_overlap(const ExperimentConfig& cfg, const Dataset& ds,
                                           std::span<const double> grid,
                                           const SuiteOptions& opt = {}) {
  std::vector<double> cent;
  if (opt.with_centralized) {
    for (auto seed : cfg.seeds) cent.push_back(run_centralized(cfg, ds, seed).auc.theta);
  }
  std::vector<SweepRow> rows;
  for (double ratio : grid) {
    ExperimentConfig c = cfg;
    c.overlap_ratio = ratio;
    OverlapSpec{ratio}.validate();
    auto results = run_trials<double>(c.seeds, opt.parallel_trials, [&](std::uint64_t seed) {
      return run_distributed(c, ds, seed).theta();
    });
    SweepRow row;
    row.overlap_ratio = ratio;
    row.thetas = results;
    row.theta_distributed = averaged_auc_over_trials(results);
    row.ci = hanley_mcneil_ci(row.theta_distributed.mean, ds.y_test.size());
    if (!cent.empty()) row.theta_centralized = averaged_auc_over_trials(cent);
    if (opt.progress) {
      opt.progress("overlap " + format_double(ratio) + ": theta_D=" +
                   format_double(row.theta_distributed.mean));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "overlap_ratio,theta_distributed_mean,theta_distributed_sd,ci_lower,ci_upper,"
         "theta_centralized_mean\n";
  for (const auto& r : rows) {
    out << format_double(r.overlap_ratio) << ',' << format_double(r.theta_distributed.mean) << ','
        << format_double(r.theta_distributed.sd) << ',' << format_double(r.ci.lower) << ','
        << format_double(r.ci.upper) << ',' << format_double(r.theta_centralized.mean) << '\n';
  }
  return out.str();
}

}  // namespace dmlp
