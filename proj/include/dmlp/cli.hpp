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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmlp/config.hpp"
#include "dmlp/errors.hpp"
#include "dmlp/experiment.hpp"

namespace dmlp::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kDivergence = 2 };

namespace detail {

template <typename T>
std::vector<T> parse_list(const std::string& flag, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(dmlp::detail::parse_number<T>(flag, item));
  }
  if (out.empty()) throw ConfigError(flag + ": empty list");
  return out;
}

}  // namespace detail

/// Entry point shared by the `dmlp` binary and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Consensus-based multi-layer perceptrons over a simulated gossip network"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "results";
  std::vector<std::string> overrides;
  std::string seed_list;
  std::string grid = "0,0.2,0.4,0.6,0.8,1.0";
  std::size_t parallel = 1;
  int verbosity = 0;

  auto add_common = [&](CLI::App* sub, bool writes) {
    sub->add_option("-c,--config", config_path, "Experiment config file")->required();
    if (writes) sub->add_option("-o,--out", out_dir, "Output directory")->capture_default_str();
    sub->add_option("--set", overrides, "Override a config key: section.key=value");
    sub->add_option("--seed-list", seed_list, "Comma-separated trial seeds");
    sub->add_option("--parallel-trials", parallel, "Trials run concurrently");
    sub->add_flag("-v,--verbose", verbosity, "Progress on standard error");
  };

  auto* run_cmd = app.add_subcommand("run", "Centralized and distributed trials, aggregated");
  auto* cent_cmd = app.add_subcommand("centralized", "Centralized baseline only");
  auto* dist_cmd = app.add_subcommand("distributed", "Distributed trials only");
  auto* sweep_cmd = app.add_subcommand("sweep-overlap", "Distributed AUC across overlap ratios");
  auto* conv_cmd = app.add_subcommand("convergence", "Centralized-vs-distributed weight-norm trace");
  auto* validate_cmd = app.add_subcommand("validate-config", "Parse and validate a config only");
  for (auto* sub : {run_cmd, cent_cmd, dist_cmd, sweep_cmd, conv_cmd}) add_common(sub, true);
  add_common(validate_cmd, false);
  sweep_cmd->add_option("--grid", grid, "Comma-separated overlap ratios")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kConfigError;
  }

  try {
    if (!seed_list.empty()) {
      const auto seeds = detail::parse_list<std::uint64_t>("--seed-list", seed_list);
      std::string joined;
      for (auto s : seeds) joined += (joined.empty() ? "" : ",") + std::to_string(s);
      overrides.push_back("experiment.seeds=" + joined);
      overrides.push_back("experiment.trials=" + std::to_string(seeds.size()));
    }
    const ExperimentConfig cfg = load_config(config_path, overrides);
    cfg.validate(true);
    if (validate_cmd->parsed()) {
      out << "config OK: " << config_path << "\n";
      return kOk;
    }

    SuiteOptions opt;
    opt.parallel_trials = parallel;
    if (verbosity > 0) opt.progress = [&err](const std::string& msg) { err << msg << "\n"; };
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    const Dataset ds = prepare_dataset(cfg);
    if (ds.n_features() < cfg.m) {
      throw ConfigError("network.m (" + std::to_string(cfg.m) + ") exceeds the feature count " +
                        std::to_string(ds.n_features()));
    }

    if (run_cmd->parsed() || dist_cmd->parsed() || conv_cmd->parsed()) {
      opt.with_centralized = !dist_cmd->parsed();
      SuiteOptions suite_opt = opt;
      // `convergence` only needs the trace.
      if (!conv_cmd->parsed()) suite_opt.out_dir = dir;
      const auto report = run_suite(cfg, ds, suite_opt);
      if (conv_cmd->parsed()) {
        dmlp::detail::write_file(dir / "convergence.csv", convergence_csv(report.trials));
      }
      const auto& s = report.summary;
      out << "theta_D " << format_double(s.theta_distributed.mean) << " +/- "
          << format_double(s.theta_distributed.sd) << "  CI [" << format_double(s.ci.lower)
          << ", " << format_double(s.ci.upper) << "]";
      if (opt.with_centralized) {
        out << "  theta_C " << format_double(s.theta_centralized.mean) << " +/- "
            << format_double(s.theta_centralized.sd)
            << "  comparable=" << (s.comparable ? "true" : "false");
      }
      out << "\n";
      return kOk;
    }

    if (cent_cmd->parsed()) {
      nlohmann::ordered_json j;
      j["name"] = cfg.name;
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      std::vector<double> thetas, iters;
      for (auto seed : cfg.seeds) {
        const auto c = run_centralized(cfg, ds, seed);
        rows.push_back({{"seed", seed},
                        {"theta_centralized", c.auc.theta},
                        {"centralized_iterations", c.iterations},
                        {"centralized_converged", c.converged}});
        thetas.push_back(c.auc.theta);
        iters.push_back(static_cast<double>(c.iterations));
        std::ostringstream loss;
        loss << "iteration,loss\n";
        for (std::size_t i = 0; i < c.loss_trace.size(); ++i) {
          loss << i + 1 << ',' << format_double(c.loss_trace[i]) << '\n';
        }
        dmlp::detail::write_file(dir / "trials" / std::to_string(seed) / "centralized_loss.csv",
                                 loss.str());
        if (opt.progress) opt.progress("seed " + std::to_string(seed) + ": theta_C=" +
                                       format_double(c.auc.theta));
      }
      j["trials"] = rows;
      const auto theta = averaged_auc_over_trials(thetas);
      j["summary"] = {{"theta_centralized", dmlp::detail::mean_sd_json(theta)},
                      {"centralized_iterations",
                       dmlp::detail::mean_sd_json(averaged_auc_over_trials(iters))}};
      dmlp::detail::write_file(dir / "report.json", j.dump(2) + "\n");
      out << "theta_C " << format_double(theta.mean) << " +/- " << format_double(theta.sd) << "\n";
      return kOk;
    }

    if (sweep_cmd->parsed()) {
      const auto ratios = detail::parse_list<double>("--grid", grid);
      const auto rows = sweep_overlap(cfg, ds, ratios, opt);
      dmlp::detail::write_file(dir / "sweep.csv", sweep_csv(rows));
      nlohmann::ordered_json j;
      j["name"] = cfg.name;
      nlohmann::ordered_json arr = nlohmann::ordered_json::array();
      for (const auto& r : rows) {
        arr.push_back({{"overlap_ratio", r.overlap_ratio},
                       {"theta_distributed", dmlp::detail::mean_sd_json(r.theta_distributed)},
                       {"ci", dmlp::detail::ci_json(r.ci)},
                       {"theta_centralized", dmlp::detail::mean_sd_json(r.theta_centralized)},
                       {"trial_thetas", r.thetas}});
        out << "overlap " << format_double(r.overlap_ratio) << ": theta_D "
            << format_double(r.theta_distributed.mean) << "\n";
      }
      j["sweep"] = arr;
      dmlp::detail::write_file(dir / "report.json", j.dump(2) + "\n");
      return kOk;
    }
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kOk;
}

}  // namespace dmlp::cli
