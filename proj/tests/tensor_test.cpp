#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "test_support.hpp"

using namespace rrhtpp;
using rrhtpp::testing::gradcheck;
using rrhtpp::testing::random_tensor;

TEST(Tensor, TanhOfZeroIsZero) {
  const auto y = ad::tanh(ad::constant(Tensor(2, 3)));
  for (double v : y.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(Tensor, SoftplusOfZeroIsLn2) {
  EXPECT_NEAR(ad::softplus(ad::scalar(0.0)).item(), std::numbers::ln2, 1e-15);
}

TEST(Tensor, SoftplusStableForLargeInputs) {
  EXPECT_DOUBLE_EQ(ad::softplus(ad::scalar(800.0)).item(), 800.0);
  EXPECT_GT(ad::softplus(ad::scalar(-800.0)).item(), -1.0);
  EXPECT_NEAR(ad::softplus(ad::scalar(-40.0)).item(), std::exp(-40.0), 1e-30);
}

TEST(Tensor, MatmulMatchesTripleLoop) {
  const Tensor a(2, 3, {1, -2, 3, 4, 0, -1});
  const Tensor b(3, 2, {2, 1, -1, 3, 5, -2});
  const auto c = ad::matmul(ad::constant(a), ad::constant(b)).value();
  ASSERT_EQ(c.rows(), 2u);
  ASSERT_EQ(c.cols(), 2u);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
      EXPECT_EQ(c(i, j), s);
    }
  EXPECT_EQ(c(0, 0), 19.0);
  EXPECT_EQ(c(1, 1), 6.0);
}

TEST(Tensor, MatmulShapeMismatchThrows) {
  EXPECT_THROW(ad::matmul(ad::constant(Tensor(2, 3)), ad::constant(Tensor(2, 3))), std::invalid_argument);
}

TEST(Tensor, SumGradientIsOnes) {
  auto w = ad::parameter(Tensor(3, 4, 0.7));
  ad::backward(ad::sum(w));
  const Tensor g = w.grad();
  ASSERT_EQ(g.rows(), 3u);
  for (double v : g.values()) EXPECT_EQ(v, 1.0);
}

TEST(Tensor, SoftplusDotGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    auto w = ad::parameter(random_tensor(1, 6, rng));
    auto x = ad::parameter(random_tensor(6, 1, rng));
    const auto rep = gradcheck([&] { return ad::softplus(ad::matmul(w, x)); }, {w, x}, 1e-5, 1e-8);
    EXPECT_LT(rep.max_rel, 1e-5) << "trial " << trial;
  }
}

// Every differentiable primitive, one at a time.
TEST(Tensor, EveryOperationMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  auto a = ad::parameter(random_tensor(3, 4, rng));
  auto b = ad::parameter(random_tensor(3, 4, rng));
  auto row = ad::parameter(random_tensor(1, 4, rng));
  auto m = ad::parameter(random_tensor(4, 2, rng));
  auto pos = ad::parameter(random_tensor(3, 4, rng, 0.5, 2.0));
  auto weights = ad::constant(random_tensor(3, 4, rng));
  // Contract against fixed weights so every output entry matters.
  auto contract = [&](const ad::Var& y) {
    if (y.value().same_shape(weights.value())) return ad::sum(ad::mul(y, weights));
    return ad::sum(ad::mul(y, ad::constant(Tensor(y.rows(), y.cols(), 0.37))));
  };
  struct Case {
    const char* name;
    std::function<ad::Var()> f;
    std::vector<ad::Var> leaves;
  };
  const std::vector<Case> cases{
      {"add", [&] { return contract(ad::add(a, b)); }, {a, b}},
      {"add-broadcast", [&] { return contract(ad::add(a, row)); }, {a, row}},
      {"sub", [&] { return contract(ad::sub(a, b)); }, {a, b}},
      {"sub-broadcast", [&] { return contract(ad::sub(a, row)); }, {a, row}},
      {"mul", [&] { return contract(ad::mul(a, b)); }, {a, b}},
      {"mul-broadcast", [&] { return contract(ad::mul(a, row)); }, {a, row}},
      {"scale", [&] { return contract(ad::scale(a, -1.7)); }, {a}},
      {"add_scalar", [&] { return contract(ad::add_scalar(a, 0.3)); }, {a}},
      {"scale_rows", [&] { return contract(ad::scale_rows(a, {0.5, -2.0, 3.0})); }, {a}},
      {"matmul", [&] { return contract(ad::matmul(a, m)); }, {a, m}},
      {"transpose", [&] { return contract(ad::transpose(ad::transpose(a))); }, {a}},
      {"concat_cols", [&] { return contract(ad::slice_cols(ad::concat_cols({a, b}), 2, 4)); }, {a, b}},
      {"concat_rows", [&] { return contract(ad::slice_rows(ad::concat_rows({a, row}), 1, 3)); }, {a, row}},
      {"slice_cols", [&] { return contract(ad::slice_cols(a, 1, 2)); }, {a}},
      {"slice_rows", [&] { return contract(ad::slice_rows(a, 1, 2)); }, {a}},
      {"gather_rows", [&] { return contract(ad::gather_rows(a, {2, 0, 2})); }, {a}},
      {"sum", [&] { return ad::scale(ad::sum(a), 1.3); }, {a}},
      {"mean_rows", [&] { return contract(ad::mean_rows(a)); }, {a}},
      {"softmax_rows", [&] { return contract(ad::softmax_rows(a)); }, {a}},
      {"tanh", [&] { return contract(ad::tanh(a)); }, {a}},
      {"sigmoid", [&] { return contract(ad::sigmoid(a)); }, {a}},
      {"softplus", [&] { return contract(ad::softplus(a)); }, {a}},
      {"cos", [&] { return contract(ad::cos(a)); }, {a}},
      {"square", [&] { return contract(ad::square(a)); }, {a}},
      {"log", [&] { return contract(ad::log(pos)); }, {pos}},
      {"exp", [&] { return contract(ad::exp(a)); }, {a}},
  };
  for (const auto& c : cases) {
    const auto rep = gradcheck(c.f, c.leaves, 1e-5, 1e-6);
    EXPECT_LT(rep.max_rel, 1e-4) << c.name;
    EXPECT_GT(rep.checked, 0u) << c.name;
  }
}

TEST(Tensor, AttentionAndGruCompositeMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  ParameterStore ps;
  AttentionBlock att(ps, "att", 6, 2, 3, rng);
  GruCell gru(ps, "gru", 3, 3, rng);
  auto x = ad::parameter(random_tensor(4, 6, rng));
  auto h = ad::parameter(random_tensor(1, 3, rng));
  auto loss = [&] {
    const auto pooled = ad::mean_rows(att(x));
    return ad::sum(ad::square(gru(h, pooled)));
  };
  auto leaves = rrhtpp::testing::all_parameters(ps);
  leaves.push_back(x);
  leaves.push_back(h);
  const auto rep = gradcheck(loss, leaves, 1e-5, 1e-6);
  EXPECT_LT(rep.max_rel, 1e-4);
}

TEST(Tensor, DetachCutsGradient) {
  auto w = ad::parameter(Tensor::scalar(2.0));
  const auto y = ad::mul(w, w);
  const auto z = ad::add(y.detach(), w);
  ad::backward(z);
  EXPECT_EQ(w.grad()[0], 1.0);
  EXPECT_FALSE(y.detach().requires_grad());
}

TEST(Tensor, NoGradRecordsNothing) {
  auto w = ad::parameter(Tensor::scalar(1.5));
  ad::Var y;
  {
    ad::NoGradGuard guard;
    y = ad::tanh(w);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_THROW(ad::backward(y), std::invalid_argument);
  EXPECT_TRUE(ad::tanh(w).requires_grad());
}

TEST(Tensor, GradientsAccumulateAcrossBackwardCalls) {
  auto w = ad::parameter(Tensor::scalar(3.0));
  ad::backward(ad::scale(w, 2.0));
  ad::backward(ad::scale(w, 5.0));
  EXPECT_EQ(w.grad()[0], 7.0);
  w.zero_grad();
  EXPECT_EQ(w.grad()[0], 0.0);
}

TEST(Tensor, SharedSubexpressionGetsBothContributions) {
  auto w = ad::parameter(Tensor::scalar(0.4));
  const auto t = ad::tanh(w);
  ad::backward(ad::mul(t, t));  // d/dw tanh(w)^2
  const double y = std::tanh(0.4);
  EXPECT_NEAR(w.grad()[0], 2.0 * y * (1.0 - y * y), 1e-15);
}

TEST(Tensor, TapeIsReleasedAfterBackward) {
  auto w = ad::parameter(Tensor::scalar(1.0));
  const auto y = ad::exp(w);
  ad::backward(y);
  EXPECT_THROW(ad::backward(y), std::logic_error);
}

TEST(Tensor, NonFiniteResultRaisesNumericError) {
  EXPECT_THROW(ad::log(ad::scalar(-1.0)), NumericError);
  EXPECT_THROW(ad::exp(ad::scalar(1e4)), NumericError);
}

TEST(Tensor, NonScalarLossIsRejected) {
  auto w = ad::parameter(Tensor(2, 2, 1.0));
  EXPECT_THROW(ad::backward(ad::tanh(w)), std::invalid_argument);
}

TEST(Tensor, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(2);
  const auto p = ad::softmax_rows(ad::constant(random_tensor(5, 7, rng, -30.0, 30.0))).value();
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) s += p(r, c);
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
}
