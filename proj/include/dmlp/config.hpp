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

// Flat key-value experiment configuration. Files use a small TOML subset:
// `[section]` headers, `key = value` lines, `#` comments, quoted or bare
// scalars and one-line arrays. Every value is addressed by its dotted key.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "dmlp/data_plane.hpp"
#include "dmlp/errors.hpp"
#include "dmlp/gossip_sim.hpp"
#include "dmlp/nn_core.hpp"

namespace dmlp {

using KeyValues = std::map<std::string, std::string>;

namespace detail {

inline std::string unquote(std::string_view v) {
  v = trim(v);
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                        (v.front() == '\'' && v.back() == '\''))) {
    v = v.substr(1, v.size() - 2);
  }
  return std::string(v);
}

/// Drops a trailing `#` comment that is not inside quotes.
inline std::string_view strip_comment(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

/// Arrays are stored as their comma-joined, unquoted elements.
inline std::string normalize_value(std::string_view raw) {
  raw = trim(raw);
  if (raw.size() >= 2 && raw.front() == '[' && raw.back() == ']') {
    std::string out;
    std::string_view body = raw.substr(1, raw.size() - 2);
    std::size_t start = 0;
    while (start <= body.size()) {
      const auto comma = body.find(',', start);
      const auto item = trim(body.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                 : comma - start));
      if (!item.empty()) {
        if (!out.empty()) out += ',';
        out += unquote(item);
      }
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return out;
  }
  return unquote(raw);
}

}  // namespace detail

inline KeyValues parse_key_values(std::string_view text, const std::string& origin = "config") {
  KeyValues kv;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos
                                                                            : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    line = detail::trim(detail::strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(origin + ": line " + std::to_string(line_no) + ": bad section header");
      }
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(origin + ": line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ": line " + std::to_string(line_no) + ": empty key");
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    kv[full] = detail::normalize_value(line.substr(eq + 1));
  }
  return kv;
}

/// Applies `key=value` overrides on top of parsed values.
inline void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + o + "' is not of the form key=value");
    }
    kv[std::string(detail::trim(std::string_view(o).substr(0, eq)))] =
        detail::normalize_value(std::string_view(o).substr(eq + 1));
  }
}

enum class DataSource { Files, LinearTeacher, MadelonLike };

struct ExperimentConfig {
  std::string name = "experiment";

  // dataset
  DataSource source = DataSource::Files;
  std::string train_path;
  std::string test_path;
  DataFormat format = DataFormat::Csv;
  std::string label_rule = "identity";
  ScalingMethod scaling = ScalingMethod::ZScore;
  std::string label_column;
  std::string train_labels_path;
  std::string test_labels_path;
  std::size_t n_features = 0;
  std::size_t synthetic_n_train = 1000;
  std::size_t synthetic_n_test = 500;
  std::size_t synthetic_n_features = 50;
  double synthetic_label_noise = 0.0;
  std::uint64_t synthetic_seed = 1;

  // network
  std::size_t m = 10;
  TopologyKind topology = TopologyKind::Complete;
  std::size_t degree = 0;
  double overlap_ratio = 0.0;

  // model
  std::size_t hidden_neurons_centralized = 50;
  ActivationKind hidden_activation = ActivationKind::Relu;
  LossKind loss = LossKind::CrossEntropy;

  // training
  double learning_rate = 0.1;
  std::size_t T = 600;
  double stop_tol = 1e-5;
  GossipGradScale gossip_grad_scale = GossipGradScale::Half;
  GradientReduction gradient_reduction = GradientReduction::Mean;
  std::size_t minibatch = 0;

  // experiment
  std::size_t trials = 3;
  std::vector<std::uint64_t> seeds = {1, 2, 3};

  KeyValues source_values;

  TrainingConfig training() const {
    TrainingConfig t;
    t.loss = loss;
    t.learning_rate = learning_rate;
    t.gossip_grad_scale = gossip_grad_scale;
    t.gradient_reduction = gradient_reduction;
    t.max_rounds = T;
    t.stop_tol = stop_tol;
    t.minibatch = minibatch;
    return t;
  }

  std::size_t hidden_per_node() const {
    return std::max<std::size_t>(1, hidden_neurons_centralized / std::max<std::size_t>(1, m));
  }

  /// Structural checks plus, when `check_files`, existence of every path.
  void validate(bool check_files = true) const {
    if (m == 0) throw ConfigError("network.m must be at least 1");
    if (hidden_neurons_centralized < m) {
      throw ConfigError("model.hidden_neurons_centralized must be at least network.m");
    }
    if (trials != seeds.size()) {
      throw ConfigError("experiment.trials (" + std::to_string(trials) +
                        ") must equal the number of experiment.seeds (" +
                        std::to_string(seeds.size()) + ")");
    }
    if (trials == 0) throw ConfigError("experiment.trials must be at least 1");
    OverlapSpec{overlap_ratio}.validate();
    training().validate();
    if (source == DataSource::Files) {
      if (train_path.empty()) throw ConfigError("dataset.train_path is required");
      if (test_path.empty()) throw ConfigError("dataset.test_path is required");
      if (check_files) {
        for (const auto* p : {&train_path, &test_path, &train_labels_path, &test_labels_path}) {
          if (!p->empty() && !std::filesystem::exists(*p)) {
            throw ConfigError("file not found: " + *p);
          }
        }
      }
      (void)parse_label_rule(label_rule);
    }
    if (source == DataSource::LinearTeacher && synthetic_n_features < m) {
      throw ConfigError("dataset.synthetic_n_features must be at least network.m");
    }
  }
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* begin = value.data();
  const char* end = value.data() + value.size();
  if constexpr (std::is_floating_point_v<T>) {
    if (value == "inf" || value == "infinity") return std::numeric_limits<T>::infinity();
  }
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": invalid number '" + value + "'");
  }
  return out;
}

template <typename F>
auto with_key(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.starts_with(key)) throw;
    throw ConfigError(key + ": " + what);
  }
}

inline std::string resolve_path(const std::string& path, const std::filesystem::path& base) {
  if (path.empty() || base.empty()) return path;
  const std::filesystem::path p(path);
  return p.is_absolute() ? path : (base / p).lexically_normal().string();
}

}  // namespace detail

/// Builds a config from dotted keys. Unknown keys are rejected. Relative
/// data paths resolve against `base_dir` (normally the config file's folder).
inline ExperimentConfig config_from_values(const KeyValues& kv,
                                           const std::filesystem::path& base_dir = {}) {
  ExperimentConfig c;
  c.source_values = kv;
  bool trials_set = false;
  bool seeds_set = false;
  for (const auto& [key, value] : kv) {
    using detail::parse_number;
    using detail::with_key;
    if (key == "experiment.name") c.name = value;
    else if (key == "dataset.source") {
      if (value == "files") c.source = DataSource::Files;
      else if (value == "linear_teacher") c.source = DataSource::LinearTeacher;
      else if (value == "madelon_like") c.source = DataSource::MadelonLike;
      else throw ConfigError(key + ": unknown source '" + value + "'");
    } else if (key == "dataset.train_path") c.train_path = detail::resolve_path(value, base_dir);
    else if (key == "dataset.test_path") c.test_path = detail::resolve_path(value, base_dir);
    else if (key == "dataset.train_labels_path") c.train_labels_path = detail::resolve_path(value, base_dir);
    else if (key == "dataset.test_labels_path") c.test_labels_path = detail::resolve_path(value, base_dir);
    else if (key == "dataset.format") c.format = with_key(key, [&] { return parse_data_format(value); });
    else if (key == "dataset.label_rule") {
      with_key(key, [&] { return parse_label_rule(value); });
      c.label_rule = value;
    } else if (key == "dataset.scaling") c.scaling = with_key(key, [&] { return parse_scaling(value); });
    else if (key == "dataset.label_column") c.label_column = value;
    else if (key == "dataset.n_features") c.n_features = parse_number<std::size_t>(key, value);
    else if (key == "dataset.synthetic_n_train") c.synthetic_n_train = parse_number<std::size_t>(key, value);
    else if (key == "dataset.synthetic_n_test") c.synthetic_n_test = parse_number<std::size_t>(key, value);
    else if (key == "dataset.synthetic_n_features") c.synthetic_n_features = parse_number<std::size_t>(key, value);
    else if (key == "dataset.synthetic_label_noise") c.synthetic_label_noise = parse_number<double>(key, value);
    else if (key == "dataset.synthetic_seed") c.synthetic_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "network.m") c.m = parse_number<std::size_t>(key, value);
    else if (key == "network.topology") c.topology = with_key(key, [&] { return parse_topology(value); });
    else if (key == "network.degree") c.degree = parse_number<std::size_t>(key, value);
    else if (key == "network.overlap_ratio") c.overlap_ratio = parse_number<double>(key, value);
    else if (key == "model.hidden_neurons_centralized") c.hidden_neurons_centralized = parse_number<std::size_t>(key, value);
    else if (key == "model.hidden_activation") c.hidden_activation = with_key(key, [&] { return parse_activation(value); });
    else if (key == "model.loss") c.loss = with_key(key, [&] { return parse_loss(value); });
    else if (key == "training.learning_rate") c.learning_rate = parse_number<double>(key, value);
    else if (key == "training.T") c.T = parse_number<std::size_t>(key, value);
    else if (key == "training.stop_tol") c.stop_tol = parse_number<double>(key, value);
    else if (key == "training.gossip_grad_scale") c.gossip_grad_scale = with_key(key, [&] { return parse_gossip_grad_scale(value); });
    else if (key == "training.gradient_reduction") c.gradient_reduction = with_key(key, [&] { return parse_gradient_reduction(value); });
    else if (key == "training.minibatch") c.minibatch = parse_number<std::size_t>(key, value);
    else if (key == "experiment.trials") {
      c.trials = parse_number<std::size_t>(key, value);
      trials_set = true;
    } else if (key == "experiment.seeds") {
      c.seeds.clear();
      std::string_view rest = value;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string item(detail::trim(rest.substr(0, comma)));
        if (!item.empty()) c.seeds.push_back(parse_number<std::uint64_t>(key, item));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
      seeds_set = true;
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  if (seeds_set && !trials_set) c.trials = c.seeds.size();
  if (trials_set && !seeds_set) {
    c.seeds.clear();
    for (std::size_t i = 1; i <= c.trials; ++i) c.seeds.push_back(i);
  }
  return c;
}

inline std::string read_text_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path);
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ExperimentConfig load_config(const std::string& path,
                                    const std::vector<std::string>& overrides = {}) {
  auto kv = parse_key_values(read_text_file(path), path);
  apply_overrides(kv, overrides);
  return config_from_values(kv, std::filesystem::path(path).parent_path());
}

}  // namespace dmlp
