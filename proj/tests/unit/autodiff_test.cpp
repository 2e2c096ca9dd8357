#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>

#include "gradient_suite.hpp"
#include "triplegan/autodiff.hpp"
#include "triplegan/error.hpp"

namespace ad = triplegan::ad;
using ad::Graph;
using ad::Tensor;
using ad::Var;

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), triplegan::DimensionError);
  EXPECT_THROW(Tensor({2, 0}), triplegan::DimensionError);
}

TEST(Tensor, GradBufferFollowsFlag) {
  Tensor t({2, 2}, 1.0);
  EXPECT_FALSE(t.has_grad());
  t.set_requires_grad(true);
  ASSERT_TRUE(t.has_grad());
  EXPECT_EQ(t.grad().size(), 4u);
  t.set_requires_grad(false);
  EXPECT_FALSE(t.has_grad());
}

TEST(Affine, IdentityWeight) {
  Graph g;
  Var y = ad::affine(g, g.constant(Tensor::matrix({{1, 2}})), g.constant(Tensor::matrix({{1, 0}, {0, 1}})),
                     g.constant(Tensor::vector({0, 0})));
  EXPECT_EQ(g.value(y).shape(), (ad::Shape{1, 2}));
  EXPECT_DOUBLE_EQ(g.value(y)[0], 1.0);
  EXPECT_DOUBLE_EQ(g.value(y)[1], 2.0);
}

TEST(Affine, HandArithmetic) {
  Graph g;
  Var y = ad::affine(g, g.constant(Tensor::matrix({{1, 1}})), g.constant(Tensor::matrix({{2}, {3}})),
                     g.constant(Tensor::vector({1})));
  EXPECT_DOUBLE_EQ(g.value(y)[0], 6.0);
}

TEST(Affine, ShapeMismatchNamesBothShapes) {
  Graph g;
  try {
    ad::affine(g, g.constant(Tensor({2, 3})), g.constant(Tensor({4, 2})), g.constant(Tensor({2})));
    FAIL() << "expected DimensionError";
  } catch (const triplegan::DimensionError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4, 2]"), std::string::npos) << msg;
  }
}

TEST(Affine, RandomBackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  auto rand = [&](ad::Shape s) {
    Tensor t(s);
    for (auto& v : t.data()) v = u(rng);
    return t;
  };
  double err = triplegan::testing::check_inputs(
      [](Graph& g, const std::vector<Var>& v) { return ad::affine(g, v[0], v[1], v[2]); },
      {rand({4, 3}), rand({3, 2}), rand({2})}, rng);
  EXPECT_LT(err, 1e-6);
}

TEST(Activation, PointValues) {
  using ad::ActivationKind;
  EXPECT_DOUBLE_EQ(ad::activation_value({ActivationKind::Sigmoid}, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(ad::activation_value({ActivationKind::LeakyRelu, 0.2}, -1.0), -0.2);
  EXPECT_DOUBLE_EQ(ad::activation_value({ActivationKind::LeakyRelu, 0.2}, 2.0), 2.0);
  EXPECT_NEAR(ad::activation_value({ActivationKind::Softplus}, 0.0), std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(ad::activation_value({ActivationKind::Tanh}, 0.0), 0.0);
}

TEST(Activation, LeakyReluDerivativeAtZeroIsSlope) {
  EXPECT_DOUBLE_EQ(ad::activation_derivative({ad::ActivationKind::LeakyRelu, 0.2}, 0.0), 0.2);
  EXPECT_DOUBLE_EQ(ad::activation_derivative({ad::ActivationKind::LeakyRelu, 0.3}, 0.0), 0.3);
}

TEST(Activation, SoftplusStaysFiniteForLargeInputs) {
  Graph g;
  Var y = ad::softplus(g, g.constant(Tensor::vector({-800, 800})));
  EXPECT_TRUE(g.value(y).all_finite());
  EXPECT_NEAR(g.value(y)[1], 800.0, 1e-12);
}

TEST(Activation, SoftplusBackwardOnFiveVector) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  Tensor x({5});
  for (auto& v : x.data()) v = u(rng);
  double err = triplegan::testing::check_inputs(
      [](Graph& g, const std::vector<Var>& v) { return ad::softplus(g, v[0]); }, {x}, rng);
  EXPECT_LT(err, 1e-6);
}

TEST(LogSoftmax, Symmetric) {
  Graph g;
  Var y = ad::log_softmax(g, g.constant(Tensor::matrix({{0, 0}})));
  EXPECT_NEAR(g.value(y)[0], -std::log(2.0), 1e-15);
  EXPECT_NEAR(g.value(y)[1], -std::log(2.0), 1e-15);
}

TEST(LogSoftmax, NoOverflowOnLargeLogits) {
  Graph g;
  Var y = ad::log_softmax(g, g.constant(Tensor::matrix({{1000, 0}})));
  EXPECT_NEAR(g.value(y)[0], 0.0, 1e-12);
  EXPECT_NEAR(g.value(y)[1], -1000.0, 1e-9);
}

TEST(LogSoftmax, RandomBackward) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  Tensor x({3, 4});
  for (auto& v : x.data()) v = u(rng);
  double err = triplegan::testing::check_inputs(
      [](Graph& g, const std::vector<Var>& v) { return ad::log_softmax(g, v[0]); }, {x}, rng);
  EXPECT_LT(err, 1e-6);
}

TEST(LogSoftmax, RowsNormalizeForLargeMagnitudes) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1000, 1000);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x({4, 6});
    for (auto& v : x.data()) v = u(rng);
    Graph g;
    const Tensor& p = g.value(ad::softmax(g, g.constant(x)));
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 6; ++c) s += p.at(r, c);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Backward, SumGivesOnes) {
  Tensor w = Tensor::vector({1, 2, 3});
  w.set_requires_grad(true);
  Graph g;
  g.backward(ad::sum(g, g.parameter(w)));
  for (double v : w.grad()) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Backward, QuadraticAtThree) {
  Tensor x = Tensor::scalar(3.0);
  x.set_requires_grad(true);
  Graph g;
  Var v = g.parameter(x);
  g.backward(ad::mul(g, v, v));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Backward, NonScalarLossIsContractError) {
  Graph g;
  Tensor w = Tensor::vector({1, 2});
  w.set_requires_grad(true);
  EXPECT_THROW(g.backward(g.parameter(w)), triplegan::ContractError);
}

TEST(Backward, GradientsAccumulateAcrossBackwardCalls) {
  Tensor w = Tensor::vector({1, 2});
  w.set_requires_grad(true);
  for (int i = 0; i < 2; ++i) {
    Graph g;
    g.backward(ad::sum(g, g.parameter(w)));
  }
  EXPECT_DOUBLE_EQ(w.grad()[0], 2.0);
  w.zero_grad();
  EXPECT_DOUBLE_EQ(w.grad()[0], 0.0);
}

TEST(Backward, ConstantsGetNoGradient) {
  Tensor w = Tensor::vector({1, 2});
  w.set_requires_grad(true);
  Graph g;
  Var c = g.constant(Tensor::vector({5, 7}));
  Var p = g.parameter(w);
  g.backward(ad::sum(g, ad::mul(g, c, p)));
  EXPECT_TRUE(g.grad(c).empty());
  EXPECT_DOUBLE_EQ(w.grad()[0], 5.0);
  EXPECT_DOUBLE_EQ(w.grad()[1], 7.0);
}

// tanh(x)·x + tanh(x)² with one shared tanh node vs. independent copies.
TEST(Backward, SharedSubexpressionMatchesExpandedGraph) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a({3, 3});
    for (auto& v : a.data()) v = u(rng);
    Tensor shared = a, expanded = a;
    shared.set_requires_grad(true);
    expanded.set_requires_grad(true);
    {
      Graph g;
      Var x = g.parameter(shared);
      Var t = ad::tanh(g, x);
      Var y = ad::add(g, ad::mul(g, t, x), ad::square(g, t));
      g.backward(ad::sum(g, y));
    }
    {
      Graph g;
      Var x1 = g.parameter(expanded);
      Var x2 = g.parameter(expanded);
      Var x3 = g.parameter(expanded);
      Var y = ad::add(g, ad::mul(g, ad::tanh(g, x1), x2), ad::square(g, ad::tanh(g, x3)));
      g.backward(ad::sum(g, y));
    }
    for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(shared.grad()[i], expanded.grad()[i], 1e-12);
  }
}

TEST(Backward, BitwiseReproducible) {
  auto run = [] {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1, 1);
    Tensor x({5, 4}), w({4, 3}), b({3});
    for (auto* t : {&x, &w, &b})
      for (auto& v : t->data()) v = u(rng);
    w.set_requires_grad(true);
    Graph g;
    Var h = ad::affine(g, g.constant(x), g.parameter(w), g.constant(b));
    g.backward(ad::mean(g, ad::log_softmax(g, ad::leaky_relu(g, h))));
    return std::vector<double>(w.grad().begin(), w.grad().end());
  };
  auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(std::bit_cast<std::uint64_t>(a[i]), std::bit_cast<std::uint64_t>(b[i]));
}

TEST(Backward, ClampBlocksGradientOutsideRange) {
  Tensor x = Tensor::vector({-2.0, 0.0, 2.0});
  x.set_requires_grad(true);
  Graph g;
  g.backward(ad::sum(g, ad::clamp(g, g.parameter(x), -1.0, 1.0)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 1.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 0.0);
}

TEST(FiniteDifference, Square) {
  std::vector<double> theta{3.0};
  auto g = ad::finite_difference_gradient([](std::span<const double> t) { return t[0] * t[0]; }, theta);
  EXPECT_NEAR(g[0], 6.0, 1e-9);
}

TEST(FiniteDifference, Sine) {
  std::vector<double> theta{0.0};
  auto g = ad::finite_difference_gradient([](std::span<const double> t) { return std::sin(t[0]); }, theta);
  EXPECT_NEAR(g[0], 1.0, 1e-9);
}

TEST(FiniteDifference, TwoLayerMlpParameters) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  auto rand = [&](ad::Shape s) {
    Tensor t(s);
    for (auto& v : t.data()) v = u(rng);
    return t;
  };
  Tensor x = rand({6, 3});
  double err = triplegan::testing::check_inputs(
      [x](Graph& g, const std::vector<Var>& v) {
        Var h = ad::leaky_relu(g, ad::affine(g, g.constant(x), v[0], v[1]));
        return ad::mean(g, ad::log_softmax(g, ad::affine(g, h, v[2], v[3])));
      },
      {rand({3, 5}), rand({5}), rand({5, 4}), rand({4})}, rng);
  EXPECT_LT(err, 1e-4);
}

// Every primitive and composite at 20 random points.
class GradientSuite : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { results_ = triplegan::testing::run_gradient_suite({20, 2024}); }
  static std::vector<triplegan::testing::GradCheck> results_;
};
std::vector<triplegan::testing::GradCheck> GradientSuite::results_;

TEST_F(GradientSuite, EveryCheckBelowTolerance) {
  ASSERT_GE(results_.size(), 30u);
  for (const auto& c : results_) {
    EXPECT_EQ(c.points, 20u) << c.name;
    EXPECT_LT(c.worst, 1e-4) << c.name;
  }
}
