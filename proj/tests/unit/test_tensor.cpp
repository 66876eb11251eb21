#include <gtest/gtest.h>

#include "ffl/tensor.hpp"
#include "support.hpp"

using namespace ffl;

namespace {

DenseNet<double> random_net(std::vector<Index> widths, std::uint64_t seed, bool last_bias = true) {
  std::vector<Index> hidden(widths.begin() + 1, widths.end() - 1);
  DenseNet<double> net(mlp_specs(widths.front(), hidden, widths.back(), last_bias));
  Rng rng(seed);
  init_fan_in_uniform(net, rng);
  // nonzero biases so the bias gradients are exercised
  for (auto& l : net.layers)
    for (Index i = 0; i < l.bias.size(); ++i) l.bias(i) = rng.uniform(-0.3, 0.3);
  return net;
}

Eigen::MatrixXd random_matrix(Index r, Index c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST(Tensor, ForwardMatchesScalarLoops) {
  auto net = random_net({7, 9, 5, 3}, 1);
  Rng rng(2);
  const Eigen::MatrixXd x = random_matrix(7, 6, rng);
  const Eigen::MatrixXd y = forward(net, x);
  for (Index c = 0; c < x.cols(); ++c) {
    const Eigen::VectorXd ref = test::naive_forward(net, x.col(c));
    for (Index r = 0; r < 3; ++r) EXPECT_NEAR(y(r, c), ref(r), 1e-12);
  }
}

TEST(Tensor, ForwardTraceOutputEqualsForward) {
  auto net = random_net({4, 6, 2}, 3);
  Rng rng(4);
  const Eigen::MatrixXd x = random_matrix(4, 5, rng);
  const auto trace = forward_trace(net, x);
  ASSERT_EQ(trace.activations.size(), 3u);
  EXPECT_EQ(trace.output(), forward(net, x));
}

TEST(Tensor, ForwardRejectsWrongInput) {
  auto net = random_net({4, 6, 2}, 3);
  EXPECT_THROW(forward(net, Eigen::MatrixXd(Eigen::MatrixXd::Zero(5, 2))), DimensionError);
}

TEST(Tensor, ForwardRejectsNonFinite) {
  auto net = random_net({2, 3, 1}, 3);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
  x(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(forward(net, x), NonFiniteError);
}

TEST(Tensor, NetConstructionChecksChaining) {
  std::vector<LayerSpec> bad{{3, 4, Activation::leaky_relu, true}, {5, 2, Activation::identity, true}};
  EXPECT_THROW(DenseNet<double>{bad}, DimensionError);
  EXPECT_THROW(DenseNet<double>{std::vector<LayerSpec>{}}, DimensionError);
}

TEST(Tensor, BackwardMatchesFiniteDifferences) {
  auto net = random_net({6, 8, 7, 4}, 11);
  Rng rng(12);
  const Eigen::MatrixXd x = random_matrix(6, 5, rng);
  const Eigen::MatrixXd up = random_matrix(4, 5, rng);
  const auto trace = forward_trace(net, x);
  const auto back = backward(net, trace, up);
  std::vector<ParamBlock<double>> blocks;
  append_blocks(blocks, net, back.params);
  // loss = <up, f(x)>, evaluated independently of forward()
  auto loss = [&] {
    double s = 0.0;
    for (Index c = 0; c < x.cols(); ++c) s += up.col(c).dot(test::naive_forward(net, x.col(c)));
    return s;
  };
  const auto report = finite_diff_check<double>(loss, blocks, {1e-5, 1000, 0});
  EXPECT_EQ(report.coordinates, static_cast<std::size_t>(net.parameter_count()));
  EXPECT_LT(report.max_relative_error, 1e-4);

  // input gradient, by hand
  Eigen::MatrixXd xp = x;
  for (Index c = 0; c < x.cols(); ++c) {
    for (Index r = 0; r < x.rows(); ++r) {
      const double orig = xp(r, c);
      xp(r, c) = orig + 1e-5;
      const double hi = up.col(c).dot(test::naive_forward(net, xp.col(c)));
      xp(r, c) = orig - 1e-5;
      const double lo = up.col(c).dot(test::naive_forward(net, xp.col(c)));
      xp(r, c) = orig;
      EXPECT_LT(test::rel_err(back.input(r, c), (hi - lo) / 2e-5), 1e-6);
    }
  }
  EXPECT_EQ(backward_input(net, trace, up), back.input);
}

TEST(Tensor, ZeroUpstreamGivesZeroGradients) {
  auto net = random_net({3, 5, 2}, 5);
  Rng rng(6);
  const auto trace = forward_trace(net, random_matrix(3, 4, rng));
  const auto back = backward(net, trace, Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 4)));
  EXPECT_EQ(back.params.max_abs(), 0.0);
  EXPECT_TRUE(back.input.isZero(0));
}

TEST(Tensor, LeakyReluSlopeAtNegativePreactivation) {
  DenseNet<double> net(std::vector<LayerSpec>{{1, 1, Activation::leaky_relu, false}});
  net.layers[0].weight(0, 0) = 1.0;
  Eigen::MatrixXd x(1, 2);
  x << -3.0, 2.0;
  const auto trace = forward_trace(net, x);
  EXPECT_DOUBLE_EQ(trace.output()(0, 0), -0.6);
  const auto g = backward_input(net, trace, Eigen::MatrixXd(Eigen::MatrixXd::Ones(1, 2)));
  EXPECT_DOUBLE_EQ(g(0, 0), 0.2);
  EXPECT_DOUBLE_EQ(g(0, 1), 1.0);
}

TEST(Tensor, BackwardRejectsWrongUpstream) {
  auto net = random_net({3, 5, 2}, 5);
  const auto trace = forward_trace(net, Eigen::MatrixXd::Ones(3, 4));
  EXPECT_THROW(backward(net, trace, Eigen::MatrixXd(Eigen::MatrixXd::Zero(3, 4))), DimensionError);
}

TEST(Tensor, SoftmaxCrossEntropyFormula) {
  Eigen::MatrixXd logits(3, 2);
  logits << 1.0, -2.0, 0.5, 0.0, -1.0, 3.0;
  const std::vector<int> labels{2, 1};
  const auto targets = one_hot_columns<double>(labels, 3);
  const auto r = softmax_cross_entropy(logits, targets);
  double expected = 0.0;
  Eigen::MatrixXd grad(3, 2);
  for (int c = 0; c < 2; ++c) {
    double z = 0.0;
    for (int k = 0; k < 3; ++k) z += std::exp(logits(k, c));
    expected += -std::log(std::exp(logits(labels[c], c)) / z);
    for (int k = 0; k < 3; ++k) grad(k, c) = (std::exp(logits(k, c)) / z - (k == labels[c] ? 1.0 : 0.0)) / 2.0;
  }
  EXPECT_NEAR(r.loss, expected / 2.0, 1e-14);
  EXPECT_TRUE(r.grad.isApprox(grad, 1e-14));
  EXPECT_GE(r.loss, 0.0);
}

TEST(Tensor, SoftmaxCrossEntropyIsStableForLargeLogits) {
  Eigen::MatrixXd logits(2, 1);
  logits << 1000.0, -1000.0;
  const auto r = softmax_cross_entropy(logits, one_hot_columns<double>(std::vector<int>{0}, 2));
  EXPECT_NEAR(r.loss, 0.0, 1e-300);
  EXPECT_TRUE(r.grad.allFinite());
  EXPECT_THROW(softmax_cross_entropy(logits, Eigen::MatrixXd(Eigen::MatrixXd::Zero(3, 1))), DimensionError);
}

TEST(Tensor, SigmoidCrossEntropyFormula) {
  Eigen::MatrixXd s(1, 4);
  s << -2.0, -0.1, 0.7, 40.0;
  Eigen::MatrixXd t(1, 4);
  t << 1.0, 0.0, 1.0, 0.0;
  const auto r = sigmoid_cross_entropy(s, t);
  double expected = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-s(i)));
    const double q = 1.0 / (1.0 + std::exp(s(i)));
    expected += -(t(i) * std::log(p) + (1.0 - t(i)) * std::log(q));
    EXPECT_NEAR(r.grad(i), (p - t(i)) / 4.0, 1e-15);
  }
  EXPECT_NEAR(r.loss, expected / 4.0, 1e-12);
}

TEST(Tensor, L1LossAndTieSubgradient) {
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 1.0, 2.0, 3.0, -1.0;
  b << 0.0, 2.0, 5.0, -1.5;
  const auto r = l1_loss(a, b);
  EXPECT_DOUBLE_EQ(r.loss, (1.0 + 0.0 + 2.0 + 0.5) / 4.0);
  EXPECT_DOUBLE_EQ(r.grad(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(r.grad(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(r.grad(1, 0), -0.25);
  EXPECT_DOUBLE_EQ(r.grad(1, 1), 0.25);
  EXPECT_THROW(l1_loss(a, Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 3))), DimensionError);
}

TEST(Tensor, OneHotAndArgmax) {
  const auto m = one_hot_columns<double>(std::vector<int>{1, 0, 2}, 3);
  EXPECT_EQ(argmax_columns(m), (std::vector<int>{1, 0, 2}));
  EXPECT_THROW(one_hot_columns<double>(std::vector<int>{3}, 3), std::out_of_range);
}

TEST(Tensor, AdamMatchesScalarRecurrence) {
  std::vector<double> p{0.5, -1.0}, m(2, 0.0), v(2, 0.0);
  const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
  double pr[2] = {0.5, -1.0}, mr[2] = {0, 0}, vr[2] = {0, 0};
  for (int step = 1; step <= 5; ++step) {
    const std::vector<double> g{0.3 * step, -0.2};
    adam_update<double>(p, g, m, v, step, cfg);
    for (int i = 0; i < 2; ++i) {
      mr[i] = 0.9 * mr[i] + 0.1 * g[i];
      vr[i] = 0.999 * vr[i] + 0.001 * g[i] * g[i];
      const double mh = mr[i] / (1 - std::pow(0.9, step));
      const double vh = vr[i] / (1 - std::pow(0.999, step));
      pr[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      EXPECT_NEAR(p[i], pr[i], 1e-15);
    }
  }
}

TEST(Tensor, AdamZeroGradientLeavesParams) {
  auto net = random_net({3, 4, 2}, 8);
  const auto before = net.layers[0].weight;
  AdamState<double> state(net, {});
  adam_step(state, net, NetGradient<double>::zeros_like(net));
  EXPECT_EQ(net.layers[0].weight, before);
  EXPECT_EQ(state.step, 1);
}

TEST(Tensor, AdamRejectsNonFiniteGradient) {
  auto net = random_net({3, 4, 2}, 8);
  AdamState<double> state(net, {});
  auto g = NetGradient<double>::zeros_like(net);
  g.weight[0](0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(adam_step(state, net, g), NonFiniteError);
}

TEST(Tensor, AdamFirstStepMovesByLearningRate) {
  auto net = random_net({2, 2}, 8);
  AdamState<double> state(net, {0.01, 0.9, 0.999, 1e-8});
  auto g = NetGradient<double>::zeros_like(net);
  g.weight[0](0, 0) = 3.0;
  const double before = net.layers[0].weight(0, 0);
  adam_step(state, net, g);
  EXPECT_NEAR(net.layers[0].weight(0, 0), before - 0.01, 1e-9);
}

TEST(Tensor, FiniteDiffCheckFlagsWrongGradient) {
  double w = 1.5;
  const double wrong = 2.0;  // d(w^2)/dw = 3
  std::vector<ParamBlock<double>> blocks{{{&w, 1}, {&wrong, 1}}};
  const auto r = finite_diff_check<double>([&] { return w * w; }, blocks);
  EXPECT_NEAR(r.max_relative_error, 1.0 / 3.0, 1e-6);
  EXPECT_EQ(w, 1.5);
}

TEST(Tensor, FloatInstantiation) {
  DenseNet<float> net(mlp_specs(3, std::vector<Index>{4}, 2));
  Rng rng(1);
  init_fan_in_uniform(net, rng);
  const Eigen::MatrixXf x = Eigen::MatrixXf::Ones(3, 2);
  const auto trace = forward_trace(net, x);
  const auto back = backward(net, trace, Eigen::MatrixXf::Ones(2, 2).eval());
  EXPECT_EQ(back.input.rows(), 3);
  AdamState<float> state(net, {});
  adam_step(state, net, back.params);
}

TEST(Tensor, FanInInitBounds) {
  auto net = random_net({16, 8}, 2);
  EXPECT_LE(net.layers[0].weight.cwiseAbs().maxCoeff(), 0.25);
  EXPECT_EQ(net.parameter_count(), 16 * 8 + 8);
}
