#pragma once

// Dense-layer numerical core: fully connected stacks with leaky-ReLU,
// their exact backward pass, the losses the models train on, Adam, and a
// central finite-difference gradient checker.
//
// Batches are stored column-wise: a (features x batch) matrix holds one
// sample per column.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ffl/rng.hpp"

namespace ffl {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string dims(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

enum class Activation { identity, leaky_relu };

inline constexpr double kLeakyReluSlope = 0.2;

struct LayerSpec {
  Index in = 0;
  Index out = 0;
  Activation activation = Activation::leaky_relu;
  bool bias = true;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Leaky-ReLU hidden layers followed by a linear output layer.
inline std::vector<LayerSpec> mlp_specs(Index in, std::span<const Index> hidden, Index out,
                                        bool output_bias = true) {
  std::vector<LayerSpec> specs;
  Index prev = in;
  for (Index width : hidden) {
    specs.push_back({prev, width, Activation::leaky_relu, true});
    prev = width;
  }
  specs.push_back({prev, out, Activation::identity, output_bias});
  return specs;
}

template <typename Scalar>
struct DenseLayer {
  Matrix<Scalar> weight;  // out x in
  Vector<Scalar> bias;    // empty when the layer has no bias
  Activation activation = Activation::identity;

  bool has_bias() const noexcept { return bias.size() != 0; }
  Index in_dim() const noexcept { return weight.cols(); }
  Index out_dim() const noexcept { return weight.rows(); }
  LayerSpec spec() const { return {in_dim(), out_dim(), activation, has_bias()}; }
};

template <typename Scalar>
struct DenseNet {
  std::vector<DenseLayer<Scalar>> layers;

  DenseNet() = default;

  // Zero-valued parameters with the given layout.
  explicit DenseNet(std::span<const LayerSpec> specs) {
    if (specs.empty()) throw DimensionError("DenseNet needs at least one layer");
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const LayerSpec& s = specs[i];
      if (s.in <= 0 || s.out <= 0) throw DimensionError("layer dims must be positive");
      if (i > 0 && specs[i - 1].out != s.in) {
        throw DimensionError("layer " + std::to_string(i) + " input " + std::to_string(s.in) +
                             " does not chain with previous output " +
                             std::to_string(specs[i - 1].out));
      }
      DenseLayer<Scalar> layer;
      layer.weight = Matrix<Scalar>::Zero(s.out, s.in);
      if (s.bias) layer.bias = Vector<Scalar>::Zero(s.out);
      layer.activation = s.activation;
      layers.push_back(std::move(layer));
    }
  }
  explicit DenseNet(const std::vector<LayerSpec>& specs)
      : DenseNet(std::span<const LayerSpec>(specs)) {}

  Index input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  Index output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers) out.push_back(l.spec());
    return out;
  }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
template <typename Scalar>
void init_fan_in_uniform(DenseNet<Scalar>& net, Rng& rng) {
  for (auto& layer : net.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_dim()));
    for (Index c = 0; c < layer.weight.cols(); ++c)
      for (Index r = 0; r < layer.weight.rows(); ++r)
        layer.weight(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
    if (layer.has_bias()) layer.bias.setZero();
  }
}

// Parameter gradient with the same layout as a DenseNet.
template <typename Scalar>
struct NetGradient {
  std::vector<Matrix<Scalar>> weight;
  std::vector<Vector<Scalar>> bias;

  static NetGradient zeros_like(const DenseNet<Scalar>& net) {
    NetGradient g;
    for (const auto& l : net.layers) {
      g.weight.push_back(Matrix<Scalar>::Zero(l.weight.rows(), l.weight.cols()));
      g.bias.push_back(Vector<Scalar>::Zero(l.bias.size()));
    }
    return g;
  }

  NetGradient& operator+=(const NetGradient& other) {
    for (std::size_t i = 0; i < weight.size(); ++i) {
      weight[i] += other.weight[i];
      bias[i] += other.bias[i];
    }
    return *this;
  }

  bool all_finite() const {
    for (std::size_t i = 0; i < weight.size(); ++i)
      if (!weight[i].allFinite() || !bias[i].allFinite()) return false;
    return true;
  }

  Scalar max_abs() const {
    Scalar m = 0;
    for (std::size_t i = 0; i < weight.size(); ++i) {
      if (weight[i].size()) m = std::max(m, weight[i].cwiseAbs().maxCoeff());
      if (bias[i].size()) m = std::max(m, bias[i].cwiseAbs().maxCoeff());
    }
    return m;
  }
};

namespace detail {

template <typename Scalar, typename Derived>
void apply_activation(Activation act, Eigen::MatrixBase<Derived>& z) {
  if (act == Activation::leaky_relu) {
    const Scalar slope = static_cast<Scalar>(kLeakyReluSlope);
    z.derived() = z.derived().unaryExpr([slope](Scalar v) { return v > Scalar(0) ? v : slope * v; });
  }
}

template <typename Scalar>
void check_finite(const Matrix<Scalar>& m, const char* where) {
  if (!m.allFinite()) throw NonFiniteError(std::string("non-finite value in ") + where);
}

}  // namespace detail

// Batched forward pass; x is (input_dim x batch).
template <typename Scalar, typename Derived>
Matrix<Scalar> forward(const DenseNet<Scalar>& net, const Eigen::MatrixBase<Derived>& x) {
  if (x.rows() != net.input_dim())
    throw DimensionError("forward: input has " + std::to_string(x.rows()) + " rows, net expects " +
                         std::to_string(net.input_dim()));
  Matrix<Scalar> h = x;
  for (const auto& layer : net.layers) {
    Matrix<Scalar> z(layer.out_dim(), h.cols());
    z.noalias() = layer.weight * h;
    if (layer.has_bias()) z.colwise() += layer.bias;
    detail::apply_activation<Scalar>(layer.activation, z);
    h = std::move(z);
  }
  detail::check_finite(h, "forward");
  return h;
}

// Per-layer inputs kept for the backward pass. activations[i] is the input
// of layer i; activations.back() is the network output.
template <typename Scalar>
struct ForwardTrace {
  std::vector<Matrix<Scalar>> activations;

  const Matrix<Scalar>& output() const { return activations.back(); }
};

template <typename Scalar, typename Derived>
ForwardTrace<Scalar> forward_trace(const DenseNet<Scalar>& net, const Eigen::MatrixBase<Derived>& x) {
  if (x.rows() != net.input_dim())
    throw DimensionError("forward: input has " + std::to_string(x.rows()) + " rows, net expects " +
                         std::to_string(net.input_dim()));
  ForwardTrace<Scalar> trace;
  trace.activations.reserve(net.layers.size() + 1);
  trace.activations.emplace_back(x);
  for (const auto& layer : net.layers) {
    const Matrix<Scalar>& h = trace.activations.back();
    Matrix<Scalar> z(layer.out_dim(), h.cols());
    z.noalias() = layer.weight * h;
    if (layer.has_bias()) z.colwise() += layer.bias;
    detail::apply_activation<Scalar>(layer.activation, z);
    trace.activations.push_back(std::move(z));
  }
  detail::check_finite(trace.activations.back(), "forward");
  return trace;
}

template <typename Scalar>
struct BackwardResult {
  NetGradient<Scalar> params;
  Matrix<Scalar> input;  // d loss / d x, (input_dim x batch)
};

// Exact gradients of <upstream, forward(net, x)> with respect to the
// parameters and the input. The leaky-ReLU derivative is read off the
// post-activation sign, which matches the pre-activation sign.
namespace detail {

template <typename Scalar>
BackwardResult<Scalar> backward_impl(const DenseNet<Scalar>& net, const ForwardTrace<Scalar>& trace,
                                     const Matrix<Scalar>& upstream, bool with_params) {
  if (trace.activations.size() != net.layers.size() + 1)
    throw DimensionError("backward: trace does not belong to this net");
  const Matrix<Scalar>& out = trace.output();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols())
    throw DimensionError("backward: upstream gradient is " + dims(upstream.rows(), upstream.cols()) +
                         ", output is " + dims(out.rows(), out.cols()));
  BackwardResult<Scalar> result;
  const std::size_t n = net.layers.size();
  if (with_params) {
    result.params.weight.resize(n);
    result.params.bias.resize(n);
  }
  Matrix<Scalar> delta = upstream;
  const Scalar slope = static_cast<Scalar>(kLeakyReluSlope);
  for (std::size_t k = n; k-- > 0;) {
    const auto& layer = net.layers[k];
    if (layer.activation == Activation::leaky_relu) {
      delta = delta.binaryExpr(trace.activations[k + 1],
                               [slope](Scalar d, Scalar a) { return a > Scalar(0) ? d : slope * d; });
    }
    if (with_params) {
      const Matrix<Scalar>& input = trace.activations[k];
      result.params.weight[k].noalias() = delta * input.transpose();
      if (layer.has_bias())
        result.params.bias[k] = delta.rowwise().sum();
      else
        result.params.bias[k].resize(0);
    }
    Matrix<Scalar> next(layer.in_dim(), delta.cols());
    next.noalias() = layer.weight.transpose() * delta;
    delta = std::move(next);
  }
  result.input = std::move(delta);
  return result;
}

}  // namespace detail

template <typename Scalar>
BackwardResult<Scalar> backward(const DenseNet<Scalar>& net, const ForwardTrace<Scalar>& trace,
                                const Matrix<Scalar>& upstream) {
  return detail::backward_impl(net, trace, upstream, true);
}

// Input gradient only; params is left empty.
template <typename Scalar>
Matrix<Scalar> backward_input(const DenseNet<Scalar>& net, const ForwardTrace<Scalar>& trace,
                              const Matrix<Scalar>& upstream) {
  return detail::backward_impl(net, trace, upstream, false).input;
}

template <typename Scalar>
struct LossResult {
  Scalar loss = 0;
  Matrix<Scalar> grad;  // d loss / d input, same shape as the input
};

// Softmax cross-entropy averaged over the batch columns.
template <typename Scalar>
LossResult<Scalar> softmax_cross_entropy(const Matrix<Scalar>& logits, const Matrix<Scalar>& targets) {
  if (logits.size() == 0) throw DimensionError("softmax_cross_entropy: empty input");
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
    throw DimensionError("softmax_cross_entropy: logits " + dims(logits.rows(), logits.cols()) +
                         " vs targets " + dims(targets.rows(), targets.cols()));
  const Index batch = logits.cols();
  LossResult<Scalar> r;
  r.grad.resize(logits.rows(), batch);
  Scalar total = 0;
  for (Index c = 0; c < batch; ++c) {
    const Scalar peak = logits.col(c).maxCoeff();
    Vector<Scalar> shifted = logits.col(c).array() - peak;
    const Scalar log_z = std::log(shifted.array().exp().sum());
    Vector<Scalar> log_p = shifted.array() - log_z;
    total -= targets.col(c).dot(log_p);
    r.grad.col(c) = log_p.array().exp().matrix() - targets.col(c);
  }
  r.loss = total / static_cast<Scalar>(batch);
  r.grad /= static_cast<Scalar>(batch);
  return r;
}

// Binary cross-entropy on logits, averaged over all entries:
// softplus(s) - t * s, i.e. -[t log sigmoid(s) + (1 - t) log(1 - sigmoid(s))].
template <typename Scalar>
LossResult<Scalar> sigmoid_cross_entropy(const Matrix<Scalar>& logits, const Matrix<Scalar>& targets) {
  if (logits.size() == 0) throw DimensionError("sigmoid_cross_entropy: empty input");
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
    throw DimensionError("sigmoid_cross_entropy: shape mismatch");
  const Scalar n = static_cast<Scalar>(logits.size());
  LossResult<Scalar> r;
  r.grad.resize(logits.rows(), logits.cols());
  Scalar total = 0;
  for (Index i = 0; i < logits.size(); ++i) {
    const Scalar s = logits(i);
    const Scalar softplus = s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
    const Scalar sigma = s >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-s))
                                : std::exp(s) / (Scalar(1) + std::exp(s));
    total += softplus - targets(i) * s;
    r.grad(i) = (sigma - targets(i)) / n;
  }
  r.loss = total / n;
  return r;
}

// Mean absolute difference over all entries; the subgradient at a tie is 0.
template <typename Scalar>
LossResult<Scalar> l1_loss(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("l1_loss: " + dims(a.rows(), a.cols()) + " vs " + dims(b.rows(), b.cols()));
  if (a.size() == 0) throw DimensionError("l1_loss: empty input");
  const Scalar n = static_cast<Scalar>(a.size());
  LossResult<Scalar> r;
  const Matrix<Scalar> diff = a - b;
  r.loss = diff.cwiseAbs().sum() / n;
  r.grad = diff.unaryExpr([n](Scalar d) {
    return d > Scalar(0) ? Scalar(1) / n : (d < Scalar(0) ? Scalar(-1) / n : Scalar(0));
  });
  return r;
}

template <typename Scalar>
Matrix<Scalar> one_hot_columns(std::span<const int> labels, Index classes) {
  Matrix<Scalar> m = Matrix<Scalar>::Zero(classes, static_cast<Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes)
      throw std::out_of_range("label " + std::to_string(labels[i]) + " outside [0, " +
                              std::to_string(classes) + ")");
    m(labels[i], static_cast<Index>(i)) = Scalar(1);
  }
  return m;
}

// Index of the largest entry per column.
template <typename Scalar>
std::vector<int> argmax_columns(const Matrix<Scalar>& m) {
  std::vector<int> out(static_cast<std::size_t>(m.cols()));
  for (Index c = 0; c < m.cols(); ++c) {
    Index best = 0;
    m.col(c).maxCoeff(&best);
    out[static_cast<std::size_t>(c)] = static_cast<int>(best);
  }
  return out;
}

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam update over a flat parameter block. step is the
// 1-based index of this update.
template <typename Scalar>
void adam_update(std::span<Scalar> params, std::span<const Scalar> grads, std::span<Scalar> m,
                 std::span<Scalar> v, std::int64_t step, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != m.size() || params.size() != v.size())
    throw DimensionError("adam: parameter/gradient/moment sizes differ");
  const Scalar b1 = static_cast<Scalar>(cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.beta2);
  const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(step));
  const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(step));
  const Scalar lr = static_cast<Scalar>(cfg.learning_rate);
  const Scalar eps = static_cast<Scalar>(cfg.epsilon);
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  const auto n = static_cast<Index>(params.size());
  Eigen::Map<Array> p(params.data(), n), mm(m.data(), n), vv(v.data(), n);
  Eigen::Map<const Array> g(grads.data(), n);
  mm = b1 * mm + (Scalar(1) - b1) * g;
  vv = b2 * vv + (Scalar(1) - b2) * g.square();
  p -= lr * (mm / c1) / ((vv / c2).sqrt() + eps);
}

template <typename Scalar>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  NetGradient<Scalar> first_moment;
  NetGradient<Scalar> second_moment;

  AdamState() = default;
  AdamState(const DenseNet<Scalar>& net, AdamConfig cfg)
      : config(cfg),
        first_moment(NetGradient<Scalar>::zeros_like(net)),
        second_moment(NetGradient<Scalar>::zeros_like(net)) {}
};

template <typename Scalar>
void adam_step(AdamState<Scalar>& state, DenseNet<Scalar>& net, const NetGradient<Scalar>& grad) {
  if (grad.weight.size() != net.layers.size() || state.first_moment.weight.size() != net.layers.size())
    throw DimensionError("adam_step: gradient layout does not match the net");
  if (!grad.all_finite()) throw NonFiniteError("adam_step: non-finite gradient");
  ++state.step;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    auto& layer = net.layers[i];
    if (grad.weight[i].rows() != layer.weight.rows() || grad.weight[i].cols() != layer.weight.cols() ||
        grad.bias[i].size() != layer.bias.size())
      throw DimensionError("adam_step: gradient shape mismatch at layer " + std::to_string(i));
    adam_update<Scalar>({layer.weight.data(), static_cast<std::size_t>(layer.weight.size())},
                        {grad.weight[i].data(), static_cast<std::size_t>(grad.weight[i].size())},
                        {state.first_moment.weight[i].data(),
                         static_cast<std::size_t>(state.first_moment.weight[i].size())},
                        {state.second_moment.weight[i].data(),
                         static_cast<std::size_t>(state.second_moment.weight[i].size())},
                        state.step, state.config);
    if (layer.has_bias()) {
      adam_update<Scalar>({layer.bias.data(), static_cast<std::size_t>(layer.bias.size())},
                          {grad.bias[i].data(), static_cast<std::size_t>(grad.bias[i].size())},
                          {state.first_moment.bias[i].data(),
                           static_cast<std::size_t>(state.first_moment.bias[i].size())},
                          {state.second_moment.bias[i].data(),
                           static_cast<std::size_t>(state.second_moment.bias[i].size())},
                          state.step, state.config);
    }
  }
}

// Visits every parameter tensor of a net in declaration order:
// layer 0 weight, layer 0 bias (if any), layer 1 weight, ...
template <typename Scalar, typename Fn>
void for_each_tensor(DenseNet<Scalar>& net, Fn&& fn) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    auto& l = net.layers[i];
    fn("layers." + std::to_string(i) + ".weight", l.weight.rows(), l.weight.cols(),
       std::span<Scalar>(l.weight.data(), static_cast<std::size_t>(l.weight.size())));
    if (l.has_bias())
      fn("layers." + std::to_string(i) + ".bias", l.bias.size(), Index{1},
         std::span<Scalar>(l.bias.data(), static_cast<std::size_t>(l.bias.size())));
  }
}

// A parameter block paired with its analytic gradient.
template <typename Scalar>
struct ParamBlock {
  std::span<Scalar> values;
  std::span<const Scalar> gradient;
};

template <typename Scalar>
void append_blocks(std::vector<ParamBlock<Scalar>>& blocks, DenseNet<Scalar>& net,
                   const NetGradient<Scalar>& grad) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    auto& l = net.layers[i];
    blocks.push_back({{l.weight.data(), static_cast<std::size_t>(l.weight.size())},
                      {grad.weight[i].data(), static_cast<std::size_t>(grad.weight[i].size())}});
    if (l.has_bias())
      blocks.push_back({{l.bias.data(), static_cast<std::size_t>(l.bias.size())},
                        {grad.bias[i].data(), static_cast<std::size_t>(grad.bias[i].size())}});
  }
}

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t max_coordinates = 256;  // all coordinates when the total is smaller
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

// Compares analytic gradients against central differences
// (f(p + h) - f(p - h)) / 2h on sampled coordinates. The relative error of a
// coordinate is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
// Parameters are restored after each probe.
template <typename Scalar>
GradCheckReport finite_diff_check(const std::function<Scalar()>& loss,
                                  std::span<const ParamBlock<Scalar>> blocks,
                                  const GradCheckOptions& opts = {}) {
  if (!(opts.step > 0)) throw std::invalid_argument("finite_diff_check: step must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  std::size_t total = 0;
  for (const auto& b : blocks) {
    if (b.values.size() != b.gradient.size())
      throw DimensionError("finite_diff_check: block/gradient size mismatch");
    total += b.values.size();
  }
  std::vector<std::pair<std::size_t, std::size_t>> all;
  all.reserve(total);
  for (std::size_t bi = 0; bi < blocks.size(); ++bi)
    for (std::size_t k = 0; k < blocks[bi].values.size(); ++k) all.emplace_back(bi, k);
  if (all.size() <= opts.max_coordinates) {
    coords = std::move(all);
  } else {
    Rng rng(opts.seed);
    rng.shuffle(all.begin(), all.end());
    coords.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(opts.max_coordinates));
  }
  const Scalar h = static_cast<Scalar>(opts.step);
  GradCheckReport report;
  for (const auto& [bi, k] : coords) {
    Scalar& p = blocks[bi].values[k];
    const Scalar original = p;
    p = original + h;
    const Scalar up = loss();
    p = original - h;
    const Scalar down = loss();
    p = original;
    const double numeric = static_cast<double>((up - down) / (Scalar(2) * h));
    const double analytic = static_cast<double>(blocks[bi].gradient[k]);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    report.max_relative_error = std::max(report.max_relative_error, std::abs(analytic - numeric) / denom);
    ++report.coordinates;
  }
  return report;
}

}  // namespace ffl
