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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmlp/errors.hpp"
#include "dmlp/nn_core.hpp"

namespace dmlp {

struct AucEstimate {
  double theta = 0.5;
  std::size_t n_samples = 0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double se = 0.0;
  double level = 0.95;
};

inline constexpr double kZ95 = 1.96;

/// Mann-Whitney estimate of the ROC area: the fraction of (positive,
/// negative) pairs ranked correctly, ties counting one half. Computed from
/// midrank sums in O(n log n).
inline AucEstimate roc_auc(std::span<const double> y, std::span<const double> scores) {
  if (y.size() != scores.size()) {
    throw InputError("roc_auc: " + std::to_string(y.size()) + " labels vs " +
                     std::to_string(scores.size()) + " scores");
  }
  AucEstimate est;
  est.n_samples = y.size();
  for (double v : y) {
    if (v == 1.0) ++est.n_pos;
    else if (v == 0.0) ++est.n_neg;
    else throw InputError("roc_auc: labels must be 0 or 1");
  }
  if (est.n_pos == 0 || est.n_neg == 0) {
    throw UndefinedAucError("roc_auc: both classes must be present");
  }
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1..j share the midrank.
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (y[order[t]] == 1.0) pos_rank_sum += midrank;
    }
    i = j;
  }
  const double np = static_cast<double>(est.n_pos);
  const double nn = static_cast<double>(est.n_neg);
  est.theta = (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
  return est;
}

/// One ROC point per distinct threshold, from (0,0) to (1,1).
struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

inline std::vector<RocPoint> roc_curve(std::span<const double> y, std::span<const double> scores) {
  const auto est = roc_auc(y, scores);
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocPoint> curve;
  curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      if (y[order[i]] == 1.0) ++tp; else ++fp;
      ++i;
    }
    curve.push_back({threshold, static_cast<double>(fp) / static_cast<double>(est.n_neg),
                     static_cast<double>(tp) / static_cast<double>(est.n_pos)});
  }
  return curve;
}

/// Hanley-McNeil standard error of an AUC estimate from the estimate and the
/// sample size alone, and the symmetric 95% interval theta +/- 1.96 SE. The
/// interval is not clipped to [0, 1].
inline ConfidenceInterval hanley_mcneil_ci(double theta, std::size_t n) {
  if (!(theta > 0.0 && theta < 1.0)) {
    throw DegenerateVarianceError("Hanley-McNeil SE needs 0 < theta < 1");
  }
  if (n < 2) throw InputError("Hanley-McNeil SE needs at least 2 samples");
  const double nd = static_cast<double>(n);
  const double q1 = theta / (2.0 - theta);
  const double q2 = 2.0 * theta * theta / (1.0 + theta);
  const double variance =
      (theta * (1.0 - theta) + (nd - 1.0) * (q1 + q2 - 2.0 * theta * theta)) / (nd * nd);
  ConfidenceInterval ci;
  ci.se = std::sqrt(variance);
  ci.lower = theta - kZ95 * ci.se;
  ci.upper = theta + kZ95 * ci.se;
  return ci;
}

/// Centralized and distributed models are comparable when the centralized
/// AUC lies inside the distributed interval.
inline bool comparable(double theta_centralized, const ConfidenceInterval& distributed_ci) {
  return distributed_ci.lower <= theta_centralized && theta_centralized <= distributed_ci.upper;
}

/// Dimension-normalized magnitude ||w||_2 / sqrt(dim w).
inline double rms_magnitude(std::span<const double> w) {
  if (w.empty()) return 0.0;
  double sq = 0.0;
  for (double v : w) sq += v * v;
  return std::sqrt(sq / static_cast<double>(w.size()));
}

/// | rms(w_centralized) - mean over nodes of rms(w_node) |
inline double convergence_metric(const MlpModel& centralized,
                                 std::span<const MlpModel* const> nodes) {
  if (nodes.empty()) throw InputError("convergence_metric needs at least one node model");
  if (!centralized.all_finite()) throw InputError("centralized model has non-finite weights");
  double mean = 0.0;
  for (const MlpModel* node : nodes) {
    if (!node->all_finite()) throw InputError("node model has non-finite weights");
    mean += rms_magnitude(node->flatten());
  }
  mean /= static_cast<double>(nodes.size());
  return std::abs(rms_magnitude(centralized.flatten()) - mean);
}

inline double convergence_metric(const MlpModel& centralized, std::span<const MlpModel> nodes) {
  std::vector<const MlpModel*> ptrs;
  for (const auto& m : nodes) ptrs.push_back(&m);
  return convergence_metric(centralized, std::span<const MlpModel* const>(ptrs));
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

/// Mean and population standard deviation.
inline MeanSd averaged_auc_over_trials(std::span<const double> values) {
  if (values.empty()) throw InputError("averaged_auc_over_trials needs at least one trial");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n)};
}

}  // namespace dmlp
