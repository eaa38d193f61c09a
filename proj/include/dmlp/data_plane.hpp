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

// Dataset ingestion, label binarization, feature scaling and vertical
// (feature-wise) partitioning across nodes.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dmlp/errors.hpp"
#include "dmlp/matrix.hpp"
#include "dmlp/rng.hpp"

namespace dmlp {

/// Train and test splits with labels in {0, 1}.
struct Dataset {
  Matrix x_train;
  std::vector<double> y_train;
  Matrix x_test;
  std::vector<double> y_test;
  std::vector<std::string> feature_names;

  std::size_t n_features() const noexcept { return x_train.cols(); }

  void validate() const {
    if (x_train.rows() != y_train.size()) {
      throw InputError("train split has " + std::to_string(x_train.rows()) + " rows but " +
                       std::to_string(y_train.size()) + " labels");
    }
    if (x_test.rows() != y_test.size()) {
      throw InputError("test split has " + std::to_string(x_test.rows()) + " rows but " +
                       std::to_string(y_test.size()) + " labels");
    }
    if (x_test.rows() > 0 && x_test.cols() != x_train.cols()) {
      throw InputError("train and test splits have different feature counts");
    }
    for (double v : x_train.data()) if (!std::isfinite(v)) throw InputError("non-finite train feature");
    for (double v : x_test.data()) if (!std::isfinite(v)) throw InputError("non-finite test feature");
    for (double y : y_train) if (y != 0.0 && y != 1.0) throw InputError("train label outside {0,1}");
    for (double y : y_test) if (y != 0.0 && y != 1.0) throw InputError("test label outside {0,1}");
  }
};

// ---------------------------------------------------------------------------
// Label rules

/// Maps raw labels onto {0, 1}.
///
///   identity      raw labels must already be 0 or 1
///   pm1           -1 -> 0, +1 -> 1
///   pair:a,b      class a -> 0, class b -> 1, every other row dropped
///   split:k       integer classes < k -> 0, >= k -> 1
///
/// Presets: `mnist_0_vs_9` (pair:0,9), `cifar_0to4_vs_5to9` (split:5).
struct LabelRule {
  enum class Kind { Identity, PlusMinusOne, ClassPair, ClassSplit };
  Kind kind = Kind::Identity;
  double negative_class = 0.0;
  double positive_class = 1.0;
  double split_at = 0.0;

  /// nullopt means the row is not part of the binary problem.
  std::optional<double> apply(double raw) const {
    switch (kind) {
      case Kind::Identity:
        if (raw == 0.0 || raw == 1.0) return raw;
        break;
      case Kind::PlusMinusOne:
        if (raw == -1.0) return 0.0;
        if (raw == 1.0) return 1.0;
        break;
      case Kind::ClassPair:
        if (raw == negative_class) return 0.0;
        if (raw == positive_class) return 1.0;
        return std::nullopt;
      case Kind::ClassSplit:
        if (raw == std::floor(raw)) return raw < split_at ? 0.0 : 1.0;
        break;
    }
    std::ostringstream msg;
    msg << "label " << raw << " is outside the domain of the label rule";
    throw InputError(msg.str());
  }
};

inline LabelRule parse_label_rule(std::string_view text) {
  LabelRule rule;
  auto number = [&](std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError("label_rule: bad number '" + std::string(s) + "'");
    }
    return v;
  };
  if (text == "identity") return rule;
  if (text == "pm1") {
    rule.kind = LabelRule::Kind::PlusMinusOne;
    return rule;
  }
  if (text == "mnist_0_vs_9") return parse_label_rule("pair:0,9");
  if (text == "cifar_0to4_vs_5to9") return parse_label_rule("split:5");
  if (text.starts_with("pair:")) {
    const auto body = text.substr(5);
    const auto comma = body.find(',');
    if (comma == std::string_view::npos) throw ConfigError("label_rule: pair needs 'pair:a,b'");
    rule.kind = LabelRule::Kind::ClassPair;
    rule.negative_class = number(body.substr(0, comma));
    rule.positive_class = number(body.substr(comma + 1));
    return rule;
  }
  if (text.starts_with("split:")) {
    rule.kind = LabelRule::Kind::ClassSplit;
    rule.split_at = number(text.substr(6));
    return rule;
  }
  throw ConfigError("label_rule: unknown rule '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Loading

enum class DataFormat { Csv, SvmLight };

inline DataFormat parse_data_format(std::string_view name) {
  if (name == "csv") return DataFormat::Csv;
  if (name == "svmlight" || name == "libsvm") return DataFormat::SvmLight;
  throw ConfigError("unknown dataset format '" + std::string(name) + "'");
}

struct LoadOptions {
  DataFormat format = DataFormat::Csv;
  LabelRule label_rule;
  /// CSV only: header name or 0-based index of the label column. Empty means
  /// the last column. Ignored when separate label files are given.
  std::string label_column;
  /// Optional one-label-per-line files. When set, every data column is a
  /// feature (the layout of the NIPS 2003 feature selection datasets).
  std::string train_labels_path;
  std::string test_labels_path;
  /// SVMLight only: feature count. 0 infers the largest index seen.
  std::size_t n_features = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  if (line.find(',') != std::string_view::npos) {
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.push_back(trim(line.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return fields;
  }
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    const auto start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

inline std::ifstream open_input(const std::string& path) {
  if (!std::filesystem::exists(path)) throw InputError("file not found: " + path);
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path);
  return in;
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Comma- or whitespace-delimited numeric table. The first line is a header
/// when none of its cells parse as numbers.
inline RawTable read_table(const std::string& path) {
  auto in = open_input(path);
  RawTable table;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (first) {
      first = false;
      const bool any_numeric = std::any_of(fields.begin(), fields.end(),
                                           [](auto f) { return parse_double(f).has_value(); });
      if (!any_numeric) {
        for (auto f : fields) table.header.emplace_back(f);
        width = fields.size();
        continue;
      }
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw InputError(path + ": row " + std::to_string(line_no) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(width));
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto v = parse_double(fields[c]);
      if (!v) {
        throw InputError(path + ": row " + std::to_string(line_no) + ", column " +
                         std::to_string(c + 1) + ": non-numeric value '" +
                         std::string(fields[c]) + "'");
      }
      row[c] = *v;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline std::vector<double> read_label_file(const std::string& path) {
  auto in = open_input(path);
  std::vector<double> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto v = parse_double(line);
    if (!v) throw InputError(path + ": row " + std::to_string(line_no) + ": non-numeric label");
    labels.push_back(*v);
  }
  return labels;
}

struct Split {
  Matrix x;
  std::vector<double> y;
  std::vector<std::string> names;
};

inline Split binarize(const std::string& path, std::vector<std::vector<double>> features,
                      std::vector<double> raw_labels, std::size_t width,
                      const LabelRule& rule) {
  Split split;
  std::vector<double> data;
  for (std::size_t r = 0; r < features.size(); ++r) {
    std::optional<double> label;
    try {
      label = rule.apply(raw_labels[r]);
    } catch (const InputError& e) {
      throw InputError(path + ": example " + std::to_string(r + 1) + ": " + e.what());
    }
    if (!label) continue;
    split.y.push_back(*label);
    data.insert(data.end(), features[r].begin(), features[r].end());
  }
  split.x = Matrix(split.y.size(), width, std::move(data));
  return split;
}

inline Split load_csv_split(const std::string& path, const std::string& labels_path,
                            const LoadOptions& opt) {
  auto table = read_table(path);
  std::vector<double> labels;
  std::vector<std::vector<double>> features;
  std::vector<std::string> names;
  std::size_t width = table.rows.empty() ? table.header.size() : table.rows.front().size();
  if (!labels_path.empty()) {
    labels = read_label_file(labels_path);
    if (labels.size() != table.rows.size()) {
      throw InputError(labels_path + ": " + std::to_string(labels.size()) + " labels for " +
                       std::to_string(table.rows.size()) + " rows in " + path);
    }
    features = std::move(table.rows);
    names = table.header;
  } else {
    if (width < 2) throw InputError(path + ": need at least one feature and a label column");
    std::size_t label_col = width - 1;
    if (!opt.label_column.empty()) {
      const auto it = std::find(table.header.begin(), table.header.end(), opt.label_column);
      if (it != table.header.end()) {
        label_col = static_cast<std::size_t>(it - table.header.begin());
      } else if (auto idx = parse_double(opt.label_column); idx && *idx >= 0 && *idx < width &&
                                                            *idx == std::floor(*idx)) {
        label_col = static_cast<std::size_t>(*idx);
      } else {
        throw ConfigError("label_column '" + opt.label_column + "' not found in " + path);
      }
    }
    for (auto& row : table.rows) {
      labels.push_back(row[label_col]);
      row.erase(row.begin() + static_cast<std::ptrdiff_t>(label_col));
      features.push_back(std::move(row));
    }
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (c != label_col) names.push_back(table.header[c]);
    }
    width -= 1;
  }
  auto split = binarize(path, std::move(features), std::move(labels), width, opt.label_rule);
  split.names = std::move(names);
  return split;
}

struct SparseRows {
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  std::vector<double> labels;
  std::size_t max_index = 0;
};

inline SparseRows read_svmlight(const std::string& path) {
  auto in = open_input(path);
  SparseRows out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    if (trim(view).empty()) continue;
    const auto fields = split_fields(view);
    const auto where = [&] { return path + ": row " + std::to_string(line_no); };
    const auto label = parse_double(fields[0]);
    if (!label) throw InputError(where() + ": non-numeric label '" + std::string(fields[0]) + "'");
    std::vector<std::pair<std::size_t, double>> row;
    for (std::size_t f = 1; f < fields.size(); ++f) {
      const auto colon = fields[f].find(':');
      if (colon == std::string_view::npos) throw InputError(where() + ": expected index:value");
      const auto key = fields[f].substr(0, colon);
      if (key == "qid") continue;
      std::size_t idx = 0;
      auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), idx);
      if (ec != std::errc() || ptr != key.data() + key.size() || idx == 0) {
        throw InputError(where() + ": bad feature index '" + std::string(key) + "'");
      }
      const auto value = parse_double(fields[f].substr(colon + 1));
      if (!value) throw InputError(where() + ": non-numeric value for feature " + std::to_string(idx));
      row.emplace_back(idx - 1, *value);
      out.max_index = std::max(out.max_index, idx);
    }
    out.rows.push_back(std::move(row));
    out.labels.push_back(*label);
  }
  return out;
}

inline Split densify(const std::string& path, SparseRows sparse, std::size_t width,
                     const LabelRule& rule) {
  std::vector<std::vector<double>> features;
  features.reserve(sparse.rows.size());
  for (const auto& row : sparse.rows) {
    std::vector<double> dense(width, 0.0);
    for (const auto& [idx, v] : row) {
      if (idx >= width) {
        throw InputError(path + ": feature index " + std::to_string(idx + 1) +
                         " exceeds n_features " + std::to_string(width));
      }
      dense[idx] = v;
    }
    features.push_back(std::move(dense));
  }
  return binarize(path, std::move(features), std::move(sparse.labels), width, rule);
}

}  // namespace detail

inline Dataset load_dataset(const std::string& train_path, const std::string& test_path,
                            const LoadOptions& options) {
  Dataset ds;
  if (options.format == DataFormat::Csv) {
    auto train = detail::load_csv_split(train_path, options.train_labels_path, options);
    auto test = detail::load_csv_split(test_path, options.test_labels_path, options);
    ds.x_train = std::move(train.x);
    ds.y_train = std::move(train.y);
    ds.x_test = std::move(test.x);
    ds.y_test = std::move(test.y);
    ds.feature_names = std::move(train.names);
  } else {
    auto train = detail::read_svmlight(train_path);
    auto test = detail::read_svmlight(test_path);
    const std::size_t width =
        options.n_features > 0 ? options.n_features : std::max(train.max_index, test.max_index);
    auto tr = detail::densify(train_path, std::move(train), width, options.label_rule);
    auto te = detail::densify(test_path, std::move(test), width, options.label_rule);
    ds.x_train = std::move(tr.x);
    ds.y_train = std::move(tr.y);
    ds.x_test = std::move(te.x);
    ds.y_test = std::move(te.y);
  }
  if (ds.x_test.rows() > 0 && ds.x_test.cols() != ds.x_train.cols()) {
    throw InputError(test_path + ": " + std::to_string(ds.x_test.cols()) +
                     " features, train split has " + std::to_string(ds.x_train.cols()));
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Scaling

enum class ScalingMethod { None, MinMax01, ZScore };

inline ScalingMethod parse_scaling(std::string_view name) {
  if (name == "none") return ScalingMethod::None;
  if (name == "minmax01") return ScalingMethod::MinMax01;
  if (name == "zscore") return ScalingMethod::ZScore;
  throw ConfigError("unknown scaling method '" + std::string(name) + "'");
}

/// Column-wise scaling fitted on the train split and applied to both splits.
/// Constant train columns map to 0. Test values are not clipped.
inline Dataset scale_features(Dataset ds, ScalingMethod method) {
  if (method == ScalingMethod::None) return ds;
  const std::size_t n = ds.x_train.cols();
  const std::size_t rows = ds.x_train.rows();
  for (std::size_t c = 0; c < n; ++c) {
    double offset = 0.0;
    double scale = 0.0;  // 0 marks a constant column
    if (method == ScalingMethod::MinMax01) {
      double lo = rows ? ds.x_train(0, c) : 0.0;
      double hi = lo;
      for (std::size_t r = 0; r < rows; ++r) {
        lo = std::min(lo, ds.x_train(r, c));
        hi = std::max(hi, ds.x_train(r, c));
      }
      offset = lo;
      if (hi > lo) scale = 1.0 / (hi - lo);
    } else {
      double mean = 0.0;
      for (std::size_t r = 0; r < rows; ++r) mean += ds.x_train(r, c);
      mean = rows ? mean / static_cast<double>(rows) : 0.0;
      double var = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        const double d = ds.x_train(r, c) - mean;
        var += d * d;
      }
      var = rows ? var / static_cast<double>(rows) : 0.0;
      offset = mean;
      if (var > 0.0) scale = 1.0 / std::sqrt(var);
    }
    auto apply = [&](Matrix& m) {
      for (std::size_t r = 0; r < m.rows(); ++r) {
        m(r, c) = scale == 0.0 ? 0.0 : (m(r, c) - offset) * scale;
      }
    };
    apply(ds.x_train);
    apply(ds.x_test);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Vertical partitioning

struct OverlapSpec {
  double overlap_ratio = 0.0;

  void validate() const {
    if (!(overlap_ratio >= 0.0 && overlap_ratio <= 1.0)) {
      throw ConfigError("overlap_ratio must lie in [0, 1]");
    }
  }

  friend bool operator==(const OverlapSpec&, const OverlapSpec&) = default;
};

/// Feature assignment for m nodes: one shared subset held by every node plus
/// a disjoint, near-equal remainder per node. Assignments are sorted.
struct VerticalPartition {
  std::vector<std::vector<std::size_t>> assignments;
  std::vector<std::size_t> shared;
  std::size_t n_features = 0;
  std::size_t m = 0;
  OverlapSpec overlap;
  std::uint64_t seed = 0;

  friend bool operator==(const VerticalPartition&, const VerticalPartition&) = default;
};

inline VerticalPartition make_partition(std::size_t n, std::size_t m, OverlapSpec overlap,
                                        std::uint64_t seed) {
  overlap.validate();
  if (m == 0) throw ConfigError("node count m must be at least 1");
  if (n < m) {
    throw ConfigError("cannot partition " + std::to_string(n) + " features over " +
                      std::to_string(m) + " nodes");
  }
  VerticalPartition part;
  part.n_features = n;
  part.m = m;
  part.overlap = overlap;
  part.seed = seed;

  Rng rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);

  const auto shared_count =
      static_cast<std::size_t>(std::llround(overlap.overlap_ratio * static_cast<double>(n)));
  part.shared.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(shared_count));
  std::sort(part.shared.begin(), part.shared.end());

  const std::size_t remainder = n - shared_count;
  const std::size_t base = remainder / m;
  const std::size_t extra = remainder % m;
  std::size_t cursor = shared_count;
  part.assignments.resize(m);
  for (std::size_t node = 0; node < m; ++node) {
    const std::size_t take = base + (node < extra ? 1 : 0);
    auto& a = part.assignments[node];
    a = part.shared;
    a.insert(a.end(), order.begin() + static_cast<std::ptrdiff_t>(cursor),
             order.begin() + static_cast<std::ptrdiff_t>(cursor + take));
    cursor += take;
    std::sort(a.begin(), a.end());
  }
  return part;
}

/// A node's column slice of the train and test splits.
struct NodeData {
  Matrix train;
  Matrix test;
};

inline NodeData project(const Dataset& ds, const VerticalPartition& part, std::size_t node) {
  if (node >= part.assignments.size()) {
    throw InputError("node id " + std::to_string(node) + " out of range for " +
                     std::to_string(part.assignments.size()) + " nodes");
  }
  const auto& cols = part.assignments[node];
  for (std::size_t c : cols) {
    if (c >= ds.n_features()) throw InputError("partition references a missing feature");
  }
  return {ds.x_train.select_columns(cols), ds.x_test.select_columns(cols)};
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Gaussian features, labels from the sign of a random linear function of all
/// features, with an optional fraction of flipped labels.
struct LinearTeacherSpec {
  std::size_t n_train = 1000;
  std::size_t n_test = 500;
  std::size_t n_features = 50;
  double label_noise = 0.0;
  std::uint64_t seed = 1;
};

inline Dataset make_linear_teacher(const LinearTeacherSpec& spec) {
  if (spec.n_features == 0) throw ConfigError("synthetic n_features must be positive");
  Rng rng(derive_seed(spec.seed, streams::kData));
  std::vector<double> teacher(spec.n_features);
  for (double& w : teacher) w = rng.normal();
  auto draw = [&](std::size_t rows, Matrix& x, std::vector<double>& y) {
    x = Matrix(rows, spec.n_features);
    y.assign(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      double score = 0.0;
      for (std::size_t c = 0; c < spec.n_features; ++c) {
        x(r, c) = rng.normal();
        score += teacher[c] * x(r, c);
      }
      y[r] = score > 0.0 ? 1.0 : 0.0;
      if (spec.label_noise > 0.0 && rng.uniform01() < spec.label_noise) y[r] = 1.0 - y[r];
    }
  };
  Dataset ds;
  draw(spec.n_train, ds.x_train, ds.y_train);
  draw(spec.n_test, ds.x_test, ds.y_test);
  return ds;
}

/// Generator following the published recipe of the NIPS 2003 Madelon set:
/// 2^k Gaussian clusters on the vertices of a k-dimensional hypercube with
/// side 2 * class_sep, labelled half and half; `redundant` random linear
/// combinations of the k informative features; `probes` pure-noise features;
/// a fraction `flip` of labels redrawn at random; feature order shuffled.
struct MadelonSpec {
  std::size_t n_train = 2000;
  std::size_t n_test = 600;
  std::size_t informative = 5;
  std::size_t redundant = 15;
  std::size_t probes = 480;
  double class_sep = 1.0;
  double flip = 0.01;
  std::uint64_t seed = 1;
};

inline Dataset make_madelon_like(const MadelonSpec& spec) {
  const std::size_t k = spec.informative;
  if (k == 0 || k > 20) throw ConfigError("madelon informative features must be in [1, 20]");
  Rng rng(derive_seed(spec.seed, streams::kData));
  const std::size_t n_clusters = std::size_t{1} << k;
  const std::size_t total = spec.n_train + spec.n_test;
  const std::size_t width = k + spec.redundant + spec.probes;

  // Vertex v sits at coordinates (+/-class_sep) given by the bits of v.
  std::vector<std::size_t> vertex_order(n_clusters);
  for (std::size_t v = 0; v < n_clusters; ++v) vertex_order[v] = v;
  rng.shuffle(vertex_order);
  std::vector<std::vector<double>> mixing(n_clusters, std::vector<double>(k * k));
  for (auto& a : mixing) for (double& v : a) v = rng.uniform(-1.0, 1.0);
  std::vector<double> combine(k * spec.redundant);
  for (double& v : combine) v = rng.uniform(-1.0, 1.0);

  Matrix x(total, width);
  std::vector<double> y(total);
  std::vector<double> z(k);
  for (std::size_t r = 0; r < total; ++r) {
    const std::size_t cluster = r % n_clusters;
    const std::size_t vertex = vertex_order[cluster];
    y[r] = cluster < n_clusters / 2 ? 0.0 : 1.0;
    for (double& v : z) v = rng.normal();
    for (std::size_t c = 0; c < k; ++c) {
      double v = 0.0;
      for (std::size_t i = 0; i < k; ++i) v += z[i] * mixing[cluster][i * k + c];
      v += ((vertex >> c) & 1U) ? spec.class_sep : -spec.class_sep;
      x(r, c) = v;
    }
    for (std::size_t j = 0; j < spec.redundant; ++j) {
      double v = 0.0;
      for (std::size_t i = 0; i < k; ++i) v += x(r, i) * combine[i * spec.redundant + j];
      x(r, k + j) = v;
    }
    for (std::size_t p = 0; p < spec.probes; ++p) x(r, k + spec.redundant + p) = rng.normal();
    if (rng.uniform01() < spec.flip) y[r] = rng.uniform01() < 0.5 ? 0.0 : 1.0;
  }

  std::vector<std::size_t> rows(total), cols(width);
  for (std::size_t i = 0; i < total; ++i) rows[i] = i;
  for (std::size_t i = 0; i < width; ++i) cols[i] = i;
  rng.shuffle(rows);
  rng.shuffle(cols);
  const Matrix shuffled = x.select_rows(rows).select_columns(cols);

  Dataset ds;
  std::vector<std::size_t> train_rows(spec.n_train), test_rows(spec.n_test);
  for (std::size_t i = 0; i < spec.n_train; ++i) train_rows[i] = i;
  for (std::size_t i = 0; i < spec.n_test; ++i) test_rows[i] = spec.n_train + i;
  ds.x_train = shuffled.select_rows(train_rows);
  ds.x_test = shuffled.select_rows(test_rows);
  for (std::size_t i : train_rows) ds.y_train.push_back(y[rows[i]]);
  for (std::size_t i : test_rows) ds.y_test.push_back(y[rows[i]]);
  return ds;
}

}  // namespace dmlp
