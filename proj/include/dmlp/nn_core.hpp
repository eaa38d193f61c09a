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

// Dense multi-layer perceptron: forward pass, losses, backpropagation driven
// by an externally supplied output residual, and plain SGD.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dmlp/errors.hpp"
#include "dmlp/matrix.hpp"
#include "dmlp/rng.hpp"

namespace dmlp {

enum class ActivationKind { Sigmoid, Relu, Tanh, Linear };
enum class LossKind { SquaredError, CrossEntropy };

/// Scale applied to the loss derivative at the averaged prediction when
/// backpropagating a gossiped loss. `Half` is the exact chain-rule factor of
/// d/d(yhat_t) [(yhat_t + yhat_u) / 2].
enum class GossipGradScale { Half, Full };

inline constexpr double kProbabilityClamp = 1e-7;

inline std::string_view to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Relu: return "relu";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::Linear: return "linear";
  }
  return "?";
}

inline std::string_view to_string(LossKind kind) {
  return kind == LossKind::SquaredError ? "squared_error" : "cross_entropy";
}

inline std::string_view to_string(GossipGradScale scale) {
  return scale == GossipGradScale::Half ? "half" : "full";
}

inline ActivationKind parse_activation(std::string_view name) {
  if (name == "sigmoid") return ActivationKind::Sigmoid;
  if (name == "relu") return ActivationKind::Relu;
  if (name == "tanh") return ActivationKind::Tanh;
  if (name == "linear") return ActivationKind::Linear;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

inline LossKind parse_loss(std::string_view name) {
  if (name == "squared_error" || name == "squared") return LossKind::SquaredError;
  if (name == "cross_entropy") return LossKind::CrossEntropy;
  throw ConfigError("unknown loss '" + std::string(name) + "'");
}

inline GossipGradScale parse_gossip_grad_scale(std::string_view name) {
  if (name == "half") return GossipGradScale::Half;
  if (name == "full") return GossipGradScale::Full;
  throw ConfigError("unknown gossip_grad_scale '" + std::string(name) + "'");
}

// Largest double below 1 and smallest positive normal double. Sigmoid
// outputs are held inside these so predictions stay strictly in (0, 1).
inline constexpr double kSigmoidHi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
inline constexpr double kSigmoidLo = std::numeric_limits<double>::min();

inline double sigmoid(double a) {
  const double s = a >= 0.0 ? 1.0 / (1.0 + std::exp(-a))
                            : std::exp(a) / (1.0 + std::exp(a));
  return std::clamp(s, kSigmoidLo, kSigmoidHi);
}

inline double activate(ActivationKind kind, double a) {
  switch (kind) {
    case ActivationKind::Sigmoid: return sigmoid(a);
    case ActivationKind::Relu: return a > 0.0 ? a : 0.0;
    case ActivationKind::Tanh: return std::tanh(a);
    case ActivationKind::Linear: return a;
  }
  return a;
}

/// d(out)/d(pre) given both the pre-activation and the activation output.
inline double activation_derivative(ActivationKind kind, double pre, double out) {
  switch (kind) {
    case ActivationKind::Sigmoid: return out * (1.0 - out);
    case ActivationKind::Relu: return pre > 0.0 ? 1.0 : 0.0;
    case ActivationKind::Tanh: return 1.0 - out * out;
    case ActivationKind::Linear: return 1.0;
  }
  return 1.0;
}

struct LayerSpec {
  std::size_t in_units = 0;
  std::size_t out_units = 0;
  ActivationKind activation = ActivationKind::Sigmoid;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Throws ConfigError unless the stack is non-empty, every layer has at
/// least one unit on each side, adjacent layers agree, and the last layer is
/// a single sigmoid unit.
inline void validate_layer_specs(std::span<const LayerSpec> specs) {
  if (specs.empty()) throw ConfigError("model needs at least one layer");
  for (std::size_t k = 0; k < specs.size(); ++k) {
    if (specs[k].in_units == 0 || specs[k].out_units == 0) {
      throw ConfigError("layer " + std::to_string(k) + " has zero units");
    }
    if (k > 0 && specs[k].in_units != specs[k - 1].out_units) {
      throw ConfigError("layer " + std::to_string(k) + " expects " +
                        std::to_string(specs[k].in_units) + " inputs but layer " +
                        std::to_string(k - 1) + " produces " +
                        std::to_string(specs[k - 1].out_units));
    }
  }
  if (specs.back().out_units != 1 ||
      specs.back().activation != ActivationKind::Sigmoid) {
    throw ConfigError("output layer must be a single sigmoid unit");
  }
}

/// One fully connected layer. `weights` is out_units x in_units, row-major,
/// so row j holds the incoming weights of unit j.
struct DenseLayer {
  LayerSpec spec;
  std::vector<double> weights;
  std::vector<double> biases;

  double& weight(std::size_t out, std::size_t in) { return weights[out * spec.in_units + in]; }
  double weight(std::size_t out, std::size_t in) const {
    return weights[out * spec.in_units + in];
  }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

class MlpModel {
 public:
  MlpModel() = default;

  /// Zero-initialized model with the given validated architecture.
  explicit MlpModel(std::span<const LayerSpec> specs) {
    validate_layer_specs(specs);
    layers_.reserve(specs.size());
    for (const auto& s : specs) {
      layers_.push_back(DenseLayer{s, std::vector<double>(s.in_units * s.out_units, 0.0),
                                   std::vector<double>(s.out_units, 0.0)});
    }
  }

  std::span<DenseLayer> layers() noexcept { return layers_; }
  std::span<const DenseLayer> layers() const noexcept { return layers_; }
  std::size_t depth() const noexcept { return layers_.size(); }
  std::size_t input_width() const noexcept {
    return layers_.empty() ? 0 : layers_.front().spec.in_units;
  }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(l.spec);
    return out;
  }

  std::size_t parameter_count() const noexcept {
    std::size_t count = 0;
    for (const auto& l : layers_) count += l.weights.size() + l.biases.size();
    return count;
  }

  /// All parameters, layer by layer, weights before biases.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) {
      out.insert(out.end(), l.weights.begin(), l.weights.end());
      out.insert(out.end(), l.biases.begin(), l.biases.end());
    }
    return out;
  }

  bool all_finite() const {
    for (const auto& l : layers_) {
      for (double w : l.weights) if (!std::isfinite(w)) return false;
      for (double b : l.biases) if (!std::isfinite(b)) return false;
    }
    return true;
  }

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

/// Convenience: n_inputs -> hidden widths -> 1 sigmoid output.
inline std::vector<LayerSpec> make_layer_specs(std::size_t n_inputs,
                                               std::span<const std::size_t> hidden,
                                               ActivationKind hidden_activation) {
  std::vector<LayerSpec> specs;
  std::size_t width = n_inputs;
  for (std::size_t h : hidden) {
    specs.push_back({width, h, hidden_activation});
    width = h;
  }
  specs.push_back({width, 1, ActivationKind::Sigmoid});
  return specs;
}

/// Weights i.i.d. uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
inline MlpModel init_model(std::span<const LayerSpec> specs, std::uint64_t seed) {
  MlpModel model(specs);
  Rng rng(seed);
  for (auto& layer : model.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.spec.in_units));
    for (double& w : layer.weights) w = rng.uniform(-bound, bound);
  }
  return model;
}

struct ForwardTrace {
  std::vector<double> input;
  std::vector<std::vector<double>> pre_activations;
  std::vector<std::vector<double>> outputs;
  double prediction = 0.0;
};

/// Per-layer activations for a whole batch. Row r of layer k's matrices
/// belongs to example r. `input` views the caller's feature matrix and must
/// not outlive it.
struct BatchTrace {
  const Matrix* input = nullptr;
  std::vector<Matrix> pre_activations;
  std::vector<Matrix> outputs;

  std::size_t size() const noexcept { return input == nullptr ? 0 : input->rows(); }

  std::vector<double> predictions() const {
    std::vector<double> out(size());
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = outputs.back()(r, 0);
    return out;
  }
};

namespace detail {

inline void layer_forward(const DenseLayer& layer, std::span<const double> in,
                          std::span<double> pre, std::span<double> out) {
  const std::size_t n_in = layer.spec.in_units;
  for (std::size_t j = 0; j < layer.spec.out_units; ++j) {
    const double* w = layer.weights.data() + j * n_in;
    double sum = 0.0;
    for (std::size_t i = 0; i < n_in; ++i) sum += in[i] * w[i];
    pre[j] = layer.biases[j] + sum;
    out[j] = activate(layer.spec.activation, pre[j]);
  }
}

/// Same arithmetic as layer_forward (each unit accumulates its inputs in
/// index order, then adds the bias) but iterates inputs in the outer loop
/// over an in x out weight copy, so the per-unit sums vectorize without
/// reassociation. Results are bitwise identical.
inline void layer_forward_rows(const DenseLayer& layer, std::span<const double> transposed,
                               const Matrix& in, Matrix& pre, Matrix& out) {
  const std::size_t n_in = layer.spec.in_units;
  const std::size_t n_out = layer.spec.out_units;
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const auto x = in.row(r);
    double* acc = pre.row(r).data();
    std::fill(acc, acc + n_out, 0.0);
    for (std::size_t i = 0; i < n_in; ++i) {
      const double xi = x[i];
      const double* w = transposed.data() + i * n_out;
      for (std::size_t j = 0; j < n_out; ++j) acc[j] += xi * w[j];
    }
    double* o = out.row(r).data();
    for (std::size_t j = 0; j < n_out; ++j) {
      acc[j] = layer.biases[j] + acc[j];
      o[j] = activate(layer.spec.activation, acc[j]);
    }
  }
}

inline void check_width(const MlpModel& model, std::size_t width) {
  if (model.depth() == 0) throw InputError("model has no layers");
  if (width != model.input_width()) {
    throw InputError("input has " + std::to_string(width) + " features, model expects " +
                     std::to_string(model.input_width()));
  }
}

}  // namespace detail

inline ForwardTrace forward(const MlpModel& model, std::span<const double> x) {
  detail::check_width(model, x.size());
  ForwardTrace trace;
  trace.input.assign(x.begin(), x.end());
  std::span<const double> in = trace.input;
  for (const auto& layer : model.layers()) {
    trace.pre_activations.emplace_back(layer.spec.out_units);
    trace.outputs.emplace_back(layer.spec.out_units);
    detail::layer_forward(layer, in, trace.pre_activations.back(), trace.outputs.back());
    in = trace.outputs.back();
  }
  trace.prediction = trace.outputs.back()[0];
  return trace;
}

/// Forward pass over every row of `x`. Row results are bitwise identical to
/// calling forward() on that row.
inline BatchTrace forward_batch(const MlpModel& model, const Matrix& x) {
  if (x.rows() > 0) detail::check_width(model, x.cols());
  BatchTrace trace;
  trace.input = &x;
  for (const auto& layer : model.layers()) {
    trace.pre_activations.emplace_back(x.rows(), layer.spec.out_units);
    trace.outputs.emplace_back(x.rows(), layer.spec.out_units);
  }
  std::vector<double> transposed;
  for (std::size_t k = 0; k < model.depth(); ++k) {
    const auto& layer = model.layers()[k];
    const std::size_t n_in = layer.spec.in_units;
    const std::size_t n_out = layer.spec.out_units;
    transposed.resize(n_in * n_out);
    for (std::size_t j = 0; j < n_out; ++j)
      for (std::size_t i = 0; i < n_in; ++i) transposed[i * n_out + j] = layer.weights[j * n_in + i];
    const Matrix& in = k == 0 ? x : trace.outputs[k - 1];
    detail::layer_forward_rows(layer, transposed, in, trace.pre_activations[k], trace.outputs[k]);
  }
  return trace;
}

inline std::vector<double> batch_predict(const MlpModel& model, const Matrix& x) {
  if (x.rows() == 0) return {};
  return forward_batch(model, x).predictions();
}

namespace detail {

inline void check_lengths(std::size_t a, std::size_t b, std::string_view what) {
  if (a != b) {
    throw InputError(std::string(what) + ": length mismatch (" + std::to_string(a) +
                     " vs " + std::to_string(b) + ")");
  }
}

inline double clamp_probability(double p) {
  return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

}  // namespace detail

/// SquaredError: 1/2 sum (y - yhat)^2.
/// CrossEntropy: -sum [y ln p + (1 - y) ln(1 - p)], p = yhat clamped to
/// [1e-7, 1 - 1e-7].
inline double compute_loss(LossKind kind, std::span<const double> y,
                           std::span<const double> yhat) {
  detail::check_lengths(y.size(), yhat.size(), "compute_loss");
  double loss = 0.0;
  if (kind == LossKind::SquaredError) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = y[i] - yhat[i];
      loss += d * d;
    }
    return 0.5 * loss;
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = detail::clamp_probability(yhat[i]);
    loss -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return loss;
}

/// dL/d(yhat_i) for each example. The cross-entropy derivative is evaluated
/// at the clamped probability.
inline std::vector<double> loss_derivative(LossKind kind, std::span<const double> y,
                                           std::span<const double> yhat) {
  detail::check_lengths(y.size(), yhat.size(), "loss_derivative");
  std::vector<double> d(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (kind == LossKind::SquaredError) {
      d[i] = -(y[i] - yhat[i]);
    } else {
      const double p = detail::clamp_probability(yhat[i]);
      d[i] = -y[i] / p + (1.0 - y[i]) / (1.0 - p);
    }
  }
  return d;
}

/// Residual for backpropagating the gossiped loss L(y, y_gossip), where
/// y_gossip is the mean of this node's and a neighbor's predictions and the
/// neighbor's predictions are held fixed.
inline std::vector<double> gossip_residual(LossKind kind, std::span<const double> y,
                                           std::span<const double> y_gossip,
                                           GossipGradScale scale) {
  auto d = loss_derivative(kind, y, y_gossip);
  if (scale == GossipGradScale::Half) {
    for (double& v : d) v *= 0.5;
  }
  return d;
}

/// Gradient buffers shaped like a model's parameters.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static Gradients zeros_like(const MlpModel& model) {
    Gradients g;
    for (const auto& l : model.layers()) {
      g.weights.emplace_back(l.weights.size(), 0.0);
      g.biases.emplace_back(l.biases.size(), 0.0);
    }
    return g;
  }

  Gradients& operator+=(const Gradients& other) {
    for (std::size_t k = 0; k < weights.size(); ++k) {
      for (std::size_t i = 0; i < weights[k].size(); ++i) weights[k][i] += other.weights[k][i];
      for (std::size_t i = 0; i < biases[k].size(); ++i) biases[k][i] += other.biases[k][i];
    }
    return *this;
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      out.insert(out.end(), weights[k].begin(), weights[k].end());
      out.insert(out.end(), biases[k].begin(), biases[k].end());
    }
    return out;
  }

  bool all_finite() const {
    for (std::size_t k = 0; k < weights.size(); ++k) {
      for (double v : weights[k]) if (!std::isfinite(v)) return false;
      for (double v : biases[k]) if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

/// Backpropagates `output_residual[r]` = dL/d(yhat_r) through the stored
/// activations and returns parameter gradients summed over the batch.
inline Gradients backward(const MlpModel& model, const BatchTrace& trace,
                          std::span<const double> output_residual) {
  if (trace.outputs.size() != model.depth() || trace.pre_activations.size() != model.depth()) {
    throw InternalError("trace depth does not match model depth");
  }
  const std::size_t batch = trace.size();
  if (output_residual.size() != batch) {
    throw InternalError("residual length " + std::to_string(output_residual.size()) +
                        " does not match batch size " + std::to_string(batch));
  }
  for (std::size_t k = 0; k < model.depth(); ++k) {
    const auto& spec = model.layers()[k].spec;
    if (trace.outputs[k].rows() != batch || trace.outputs[k].cols() != spec.out_units) {
      throw InternalError("trace layer " + std::to_string(k) + " has the wrong shape");
    }
  }
  if (batch > 0 && trace.input->cols() != model.input_width()) {
    throw InternalError("trace input width does not match model");
  }

  Gradients grads = Gradients::zeros_like(model);
  const std::size_t depth = model.depth();
  std::size_t widest = 1;
  for (const auto& l : model.layers()) widest = std::max({widest, l.spec.in_units, l.spec.out_units});
  std::vector<double> delta(widest);
  std::vector<double> upstream(widest);

  for (std::size_t r = 0; r < batch; ++r) {
    if (output_residual[r] == 0.0) continue;
    {
      const auto& out = model.layers()[depth - 1].spec;
      delta[0] = output_residual[r] *
                 activation_derivative(out.activation, trace.pre_activations[depth - 1](r, 0),
                                       trace.outputs[depth - 1](r, 0));
    }
    for (std::size_t k = depth; k-- > 0;) {
      const auto& layer = model.layers()[k];
      const std::size_t n_in = layer.spec.in_units;
      const std::size_t n_out = layer.spec.out_units;
      std::span<const double> in = k == 0 ? trace.input->row(r) : trace.outputs[k - 1].row(r);
      auto& gw = grads.weights[k];
      auto& gb = grads.biases[k];
      for (std::size_t j = 0; j < n_out; ++j) {
        const double dj = delta[j];
        if (dj == 0.0) continue;
        gb[j] += dj;
        double* row = gw.data() + j * n_in;
        for (std::size_t i = 0; i < n_in; ++i) row[i] += dj * in[i];
      }
      if (k == 0) break;
      const auto& below = model.layers()[k - 1].spec;
      std::fill(upstream.begin(), upstream.begin() + n_in, 0.0);
      for (std::size_t j = 0; j < n_out; ++j) {
        const double dj = delta[j];
        if (dj == 0.0) continue;
        const double* w = layer.weights.data() + j * n_in;
        for (std::size_t i = 0; i < n_in; ++i) upstream[i] += w[i] * dj;
      }
      for (std::size_t i = 0; i < n_in; ++i) {
        delta[i] = upstream[i] * activation_derivative(below.activation,
                                                       trace.pre_activations[k - 1](r, i),
                                                       trace.outputs[k - 1](r, i));
      }
    }
  }
  return grads;
}

/// p <- p - learning_rate * grad(p), in place.
inline void sgd_step(MlpModel& model, const Gradients& grads, double learning_rate) {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be a finite non-negative number");
  }
  if (grads.weights.size() != model.depth()) {
    throw InternalError("gradient depth does not match model depth");
  }
  if (!grads.all_finite()) throw DivergenceError("non-finite gradient");
  for (std::size_t k = 0; k < model.depth(); ++k) {
    auto& layer = model.layers()[k];
    if (grads.weights[k].size() != layer.weights.size() ||
        grads.biases[k].size() != layer.biases.size()) {
      throw InternalError("gradient shape does not match layer " + std::to_string(k));
    }
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      layer.weights[i] -= learning_rate * grads.weights[k][i];
    }
    for (std::size_t i = 0; i < layer.biases.size(); ++i) {
      layer.biases[i] -= learning_rate * grads.biases[k][i];
    }
  }
  if (!model.all_finite()) throw DivergenceError("non-finite weight after SGD step");
}

}  // namespace dmlp
