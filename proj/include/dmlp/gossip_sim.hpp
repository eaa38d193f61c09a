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

// The consensus training protocol: each node runs a local MLP on its own
// feature slice, gossips prediction vectors with a random neighbor, and both
// peers backpropagate the loss of the averaged prediction.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dmlp/errors.hpp"
#include "dmlp/format.hpp"
#include "dmlp/matrix.hpp"
#include "dmlp/nn_core.hpp"
#include "dmlp/rng.hpp"

namespace dmlp {

// ---------------------------------------------------------------------------
// Topology

enum class TopologyKind { Complete, Ring, RandomRegular };

inline TopologyKind parse_topology(std::string_view name) {
  if (name == "complete") return TopologyKind::Complete;
  if (name == "ring") return TopologyKind::Ring;
  if (name == "random_regular") return TopologyKind::RandomRegular;
  throw ConfigError("unknown topology '" + std::string(name) + "'");
}

inline std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::Complete: return "complete";
    case TopologyKind::Ring: return "ring";
    case TopologyKind::RandomRegular: return "random_regular";
  }
  return "?";
}

/// Undirected simple graph over nodes 0..m-1. Neighbor lists are sorted.
struct Topology {
  std::size_t m = 0;
  std::vector<std::vector<std::size_t>> adjacency;

  std::size_t degree(std::size_t node) const { return adjacency.at(node).size(); }

  bool has_edge(std::size_t a, std::size_t b) const {
    const auto& adj = adjacency.at(a);
    return std::binary_search(adj.begin(), adj.end(), b);
  }

  bool connected() const {
    if (m == 0) return true;
    std::vector<bool> seen(m, false);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = true;
    std::size_t count = 1;
    while (!frontier.empty()) {
      const auto u = frontier.front();
      frontier.pop();
      for (auto v : adjacency[u]) {
        if (!seen[v]) {
          seen[v] = true;
          ++count;
          frontier.push(v);
        }
      }
    }
    return count == m;
  }

  /// Throws ConfigError unless undirected, loop-free, duplicate-free and
  /// connected.
  void validate() const {
    if (adjacency.size() != m) throw ConfigError("adjacency size does not match node count");
    for (std::size_t u = 0; u < m; ++u) {
      const auto& adj = adjacency[u];
      if (!std::is_sorted(adj.begin(), adj.end()) ||
          std::adjacent_find(adj.begin(), adj.end()) != adj.end()) {
        throw ConfigError("neighbor list of node " + std::to_string(u) + " is not a sorted set");
      }
      for (auto v : adj) {
        if (v >= m) throw ConfigError("edge to missing node " + std::to_string(v));
        if (v == u) throw ConfigError("self-loop at node " + std::to_string(u));
        if (!has_edge(v, u)) throw ConfigError("edge " + std::to_string(u) + "-" +
                                               std::to_string(v) + " is not symmetric");
      }
    }
    if (!connected()) throw ConfigError("topology is not connected");
  }

  static Topology from_edges(std::size_t m,
                             std::span<const std::pair<std::size_t, std::size_t>> edges) {
    Topology t;
    t.m = m;
    t.adjacency.resize(m);
    for (auto [a, b] : edges) {
      if (a >= m || b >= m) throw ConfigError("edge references a missing node");
      t.adjacency[a].push_back(b);
      t.adjacency[b].push_back(a);
    }
    for (auto& adj : t.adjacency) std::sort(adj.begin(), adj.end());
    t.validate();
    return t;
  }
};

/// `degree` is only read for RandomRegular. Random regular graphs are drawn
/// with the configuration model, retrying until simple and connected.
inline Topology build_topology(TopologyKind kind, std::size_t m, std::uint64_t seed,
                               std::size_t degree = 0) {
  if (m == 0) throw ConfigError("topology needs at least one node");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  switch (kind) {
    case TopologyKind::Complete:
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) edges.emplace_back(a, b);
      break;
    case TopologyKind::Ring:
      if (m == 2) edges.emplace_back(0, 1);
      if (m > 2)
        for (std::size_t a = 0; a < m; ++a) edges.emplace_back(std::min(a, (a + 1) % m),
                                                               std::max(a, (a + 1) % m));
      break;
    case TopologyKind::RandomRegular: {
      if (m == 1 && degree == 0) break;
      if (degree == 0 || degree >= m || (degree * m) % 2 != 0) {
        throw ConfigError("random_regular(" + std::to_string(degree) + ") is unsatisfiable for " +
                          std::to_string(m) + " nodes");
      }
      if (degree == 1 && m > 2) {
        throw ConfigError("random_regular(1) cannot be connected for more than 2 nodes");
      }
      Rng rng(derive_seed(seed, streams::kTopology));
      constexpr int kAttempts = 10000;
      for (int attempt = 0; attempt < kAttempts; ++attempt) {
        std::vector<std::size_t> stubs;
        for (std::size_t u = 0; u < m; ++u)
          for (std::size_t d = 0; d < degree; ++d) stubs.push_back(u);
        rng.shuffle(stubs);
        std::vector<std::vector<std::size_t>> adj(m);
        bool simple = true;
        edges.clear();
        for (std::size_t s = 0; s < stubs.size() && simple; s += 2) {
          const auto a = std::min(stubs[s], stubs[s + 1]);
          const auto b = std::max(stubs[s], stubs[s + 1]);
          if (a == b || std::find(adj[a].begin(), adj[a].end(), b) != adj[a].end()) {
            simple = false;
            break;
          }
          adj[a].push_back(b);
          adj[b].push_back(a);
          edges.emplace_back(a, b);
        }
        if (!simple) continue;
        Topology t;
        t.m = m;
        t.adjacency = std::move(adj);
        for (auto& l : t.adjacency) std::sort(l.begin(), l.end());
        if (t.connected()) return t;
      }
      throw ConfigError("could not draw a connected random_regular(" + std::to_string(degree) +
                        ") graph on " + std::to_string(m) + " nodes");
    }
  }
  return Topology::from_edges(m, edges);
}

// ---------------------------------------------------------------------------
// Node state and gossip

enum class GradientReduction { Sum, Mean };

inline GradientReduction parse_gradient_reduction(std::string_view name) {
  if (name == "sum") return GradientReduction::Sum;
  if (name == "mean") return GradientReduction::Mean;
  throw ConfigError("unknown gradient_reduction '" + std::string(name) + "'");
}

inline std::string_view to_string(GradientReduction r) {
  return r == GradientReduction::Sum ? "sum" : "mean";
}

struct TrainingConfig {
  LossKind loss = LossKind::CrossEntropy;
  double learning_rate = 0.1;
  GossipGradScale gossip_grad_scale = GossipGradScale::Half;
  GradientReduction gradient_reduction = GradientReduction::Mean;
  std::size_t max_rounds = 600;
  double stop_tol = 1e-5;
  /// 0 means full batch.
  std::size_t minibatch = 0;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("training.learning_rate must be finite and non-negative");
    }
    if (max_rounds == 0) throw ConfigError("training.T must be at least 1");
    if (std::isnan(stop_tol) || stop_tol < 0.0) {
      throw ConfigError("training.stop_tol must be non-negative");
    }
  }
};

struct NodeState {
  std::size_t node_id = 0;
  MlpModel model;
  std::vector<std::size_t> feature_assignment;
  std::vector<double> predictions;
  double local_loss = 0.0;
  std::vector<double> last_weight_snapshot;
};

/// Builds node states and runs the initial forward pass on each node.
inline std::vector<NodeState> init_nodes(std::vector<MlpModel> models,
                                         std::span<const std::vector<std::size_t>> assignments,
                                         std::span<const Matrix> train, std::span<const double> y,
                                         LossKind loss) {
  if (models.size() != train.size() || assignments.size() != train.size()) {
    throw InputError("init_nodes: models, assignments and data disagree on node count");
  }
  std::vector<NodeState> nodes(models.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto& n = nodes[i];
    n.node_id = i;
    n.model = std::move(models[i]);
    n.feature_assignment = assignments[i];
    n.predictions = batch_predict(n.model, train[i]);
    n.local_loss = compute_loss(loss, y, n.predictions);
    n.last_weight_snapshot = n.model.flatten();
  }
  return nodes;
}

/// Result of one pairwise exchange. Built from prediction vectors only.
struct GossipEvent {
  std::size_t round = 0;
  std::size_t initiator = 0;
  std::size_t responder = 0;
  std::vector<double> y_gossip;
  /// Loss of y_gossip against the labels.
  double gossiped_loss = 0.0;
  /// (L_t + L_u) / 2, kept for diagnostics.
  double mean_local_loss = 0.0;
};

inline GossipEvent gossip(std::size_t round, std::size_t initiator, std::size_t responder,
                          std::span<const double> y, std::span<const double> initiator_predictions,
                          std::span<const double> responder_predictions, LossKind loss) {
  if (initiator_predictions.size() != y.size() || responder_predictions.size() != y.size()) {
    throw InputError("gossip: prediction vectors must match the label count");
  }
  GossipEvent ev;
  ev.round = round;
  ev.initiator = initiator;
  ev.responder = responder;
  ev.y_gossip.resize(y.size());
  for (std::size_t r = 0; r < y.size(); ++r) {
    ev.y_gossip[r] = 0.5 * (initiator_predictions[r] + responder_predictions[r]);
  }
  ev.gossiped_loss = compute_loss(loss, y, ev.y_gossip);
  ev.mean_local_loss = 0.5 * (compute_loss(loss, y, initiator_predictions) +
                              compute_loss(loss, y, responder_predictions));
  return ev;
}

struct GossipSummary {
  std::size_t initiator = 0;
  /// nullopt when the initiator has no neighbors and trained locally.
  std::optional<std::size_t> responder;
  double gossiped_loss = 0.0;
  double mean_local_loss = 0.0;
};

struct RoundLog {
  std::size_t round = 0;
  std::vector<GossipSummary> events;
  std::vector<double> node_losses;
  double mean_local_loss = 0.0;
  double max_weight_delta = 0.0;
  std::optional<double> convergence_metric;
};

namespace detail {

inline void reduce_residual(std::vector<double>& residual, GradientReduction reduction) {
  if (reduction == GradientReduction::Mean && !residual.empty()) {
    const double inv = 1.0 / static_cast<double>(residual.size());
    for (double& r : residual) r *= inv;
  }
}

inline void apply_update(NodeState& node, const BatchTrace& trace,
                         std::span<const double> residual, double learning_rate,
                         std::size_t round) {
  try {
    sgd_step(node.model, backward(node.model, trace, residual), learning_rate);
  } catch (const DivergenceError& e) {
    throw DivergenceError("round " + std::to_string(round) + ", node " +
                          std::to_string(node.node_id) + ": " + e.what());
  }
}

inline double max_abs_delta(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace detail

/// One synchronous round. Initiators run in id order; each draws a neighbor
/// uniformly, both run fresh forward passes, and both backpropagate the loss
/// of the averaged predictions. Events apply sequentially, so later events see
/// earlier updates. A node without neighbors trains on its local loss.
inline RoundLog run_round(std::vector<NodeState>& nodes, const Topology& topo,
                          std::span<const Matrix> data, std::span<const double> y,
                          const TrainingConfig& cfg, Rng& rng, std::size_t round) {
  if (nodes.size() != topo.m || data.size() != topo.m) {
    throw InputError("run_round: node, topology and data counts disagree");
  }
  for (const auto& d : data) {
    if (d.rows() != y.size()) throw InputError("run_round: node data rows do not match labels");
  }
  RoundLog log;
  log.round = round;
  const std::size_t n_rows = y.size();
  const bool use_minibatch = cfg.minibatch > 0 && cfg.minibatch < n_rows;

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::vector<std::size_t> rows;
    std::vector<double> y_batch;
    if (use_minibatch) {
      std::vector<std::size_t> all(n_rows);
      for (std::size_t r = 0; r < n_rows; ++r) all[r] = r;
      for (std::size_t r = 0; r < cfg.minibatch; ++r) std::swap(all[r], all[r + rng.index(n_rows - r)]);
      rows.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cfg.minibatch));
      std::sort(rows.begin(), rows.end());
      for (auto r : rows) y_batch.push_back(y[r]);
    }
    const std::span<const double> labels = use_minibatch ? std::span<const double>(y_batch) : y;
    auto slice = [&](std::size_t node) {
      return use_minibatch ? data[node].select_rows(rows) : Matrix();
    };

    const Matrix x_i = slice(i);
    const Matrix& in_i = use_minibatch ? x_i : data[i];
    const BatchTrace trace_i = forward_batch(nodes[i].model, in_i);
    const auto pred_i = trace_i.predictions();

    GossipSummary summary;
    summary.initiator = i;
    if (topo.degree(i) == 0) {
      const double loss = compute_loss(cfg.loss, labels, pred_i);
      if (!std::isfinite(loss)) {
        throw DivergenceError("round " + std::to_string(round) + ", node " + std::to_string(i) +
                              ": non-finite loss");
      }
      auto residual = loss_derivative(cfg.loss, labels, pred_i);
      detail::reduce_residual(residual, cfg.gradient_reduction);
      detail::apply_update(nodes[i], trace_i, residual, cfg.learning_rate, round);
      summary.gossiped_loss = loss;
      summary.mean_local_loss = loss;
    } else {
      const std::size_t j = topo.adjacency[i][rng.index(topo.degree(i))];
      const Matrix x_j = slice(j);
      const Matrix& in_j = use_minibatch ? x_j : data[j];
      const BatchTrace trace_j = forward_batch(nodes[j].model, in_j);
      const auto pred_j = trace_j.predictions();
      const auto ev = gossip(round, i, j, labels, pred_i, pred_j, cfg.loss);
      if (!std::isfinite(ev.gossiped_loss)) {
        throw DivergenceError("round " + std::to_string(round) + ", node " + std::to_string(i) +
                              ": non-finite gossiped loss");
      }
      auto residual = gossip_residual(cfg.loss, labels, ev.y_gossip, cfg.gossip_grad_scale);
      detail::reduce_residual(residual, cfg.gradient_reduction);
      detail::apply_update(nodes[i], trace_i, residual, cfg.learning_rate, round);
      detail::apply_update(nodes[j], trace_j, residual, cfg.learning_rate, round);
      summary.responder = j;
      summary.gossiped_loss = ev.gossiped_loss;
      summary.mean_local_loss = ev.mean_local_loss;
    }
    log.events.push_back(summary);
  }

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto& node = nodes[i];
    node.predictions = batch_predict(node.model, data[i]);
    node.local_loss = compute_loss(cfg.loss, y, node.predictions);
    if (!std::isfinite(node.local_loss)) {
      throw DivergenceError("round " + std::to_string(round) + ", node " + std::to_string(i) +
                            ": non-finite local loss");
    }
    auto weights = node.model.flatten();
    log.max_weight_delta =
        std::max(log.max_weight_delta, detail::max_abs_delta(weights, node.last_weight_snapshot));
    node.last_weight_snapshot = std::move(weights);
    log.node_losses.push_back(node.local_loss);
    log.mean_local_loss += node.local_loss;
  }
  if (!nodes.empty()) log.mean_local_loss /= static_cast<double>(nodes.size());
  return log;
}

/// Called after every round; a returned value is recorded as that round's
/// convergence metric.
using RoundObserver =
    std::function<std::optional<double>(std::size_t round, const std::vector<NodeState>&)>;

struct TrainingResult {
  std::vector<RoundLog> rounds;
  bool converged = false;
};

/// Runs rounds 1..T, stopping after the first round whose largest per-node
/// max-norm weight change is below stop_tol.
inline TrainingResult run_training(std::vector<NodeState>& nodes, const Topology& topo,
                                   std::span<const Matrix> data, std::span<const double> y,
                                   const TrainingConfig& cfg, Rng& rng,
                                   const RoundObserver& observer = {}) {
  cfg.validate();
  TrainingResult result;
  for (std::size_t round = 1; round <= cfg.max_rounds; ++round) {
    auto log = run_round(nodes, topo, data, y, cfg, rng, round);
    if (observer) log.convergence_metric = observer(round, nodes);
    const bool stop = log.max_weight_delta < cfg.stop_tol;
    result.rounds.push_back(std::move(log));
    if (stop) {
      result.converged = true;
      break;
    }
  }
  return result;
}

/// Per-example mean of every node's predicted probability.
inline std::vector<double> distributed_predict(std::span<const NodeState> nodes,
                                               std::span<const Matrix> test) {
  if (nodes.empty()) throw InputError("distributed_predict needs at least one node");
  if (test.size() != nodes.size()) throw InputError("distributed_predict: one test matrix per node");
  const std::size_t rows = test.front().rows();
  for (const auto& t : test) {
    if (t.rows() != rows) throw InputError("distributed_predict: test row counts differ across nodes");
  }
  std::vector<double> mean(rows, 0.0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto p = batch_predict(nodes[i].model, test[i]);
    for (std::size_t r = 0; r < rows; ++r) mean[r] += p[r];
  }
  for (double& v : mean) v /= static_cast<double>(nodes.size());
  return mean;
}

/// round,mean_local_loss,max_weight_delta,convergence_metric
inline void write_rounds_csv(std::ostream& out, std::span<const RoundLog> rounds) {
  out << "round,mean_local_loss,max_weight_delta,convergence_metric\n";
  for (const auto& r : rounds) {
    out << r.round << ',' << format_double(r.mean_local_loss) << ','
        << format_double(r.max_weight_delta) << ',';
    if (r.convergence_metric) out << format_double(*r.convergence_metric);
    out << '\n';
  }
}

}  // namespace dmlp
