#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "sewa/error.hpp"
#include "sewa/nn.hpp"
#include "sewa/rng.hpp"
#include "support/helpers.hpp"
#include "support/quad_oracle.hpp"

using namespace sewa;
using testing_support::close_coordinates;
using testing_support::random_dataset;

namespace {

MlpSpec make_spec(std::vector<std::size_t> sizes, Activation a, LossKind loss, bool bias = true) {
  MlpSpec spec;
  spec.layer_sizes = std::move(sizes);
  spec.activation = a;
  spec.loss = loss;
  spec.bias = bias;
  return spec;
}

}  // namespace

// ---- rng ----

TEST(Rng, OpenUnitNeverHitsEndpoints) {
  EXPECT_GT(rng::to_open_unit(0), 0.0);
  EXPECT_LT(rng::to_open_unit(~0ULL), 1.0);
  EXPECT_EQ(rng::to_open_unit(0), 0x1.0p-53);
  EXPECT_EQ(rng::to_open_unit(~0ULL), 1.0 - 0x1.0p-53);
}

TEST(Rng, DeriveIsPureAndKeySensitive) {
  EXPECT_EQ(rng::derive(1, 2, 3), rng::derive(1, 2, 3));
  EXPECT_NE(rng::derive(1, 2, 3), rng::derive(1, 3, 2));
  EXPECT_NE(rng::derive(1), rng::derive(2));
}

TEST(Rng, StreamIsSplitmix64) {
  // Reference outputs of splitmix64 seeded with 0.
  rng::Stream st(0);
  EXPECT_EQ(st.next(), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(st.next(), 0x6e789e6aa1b965f4ULL);
  EXPECT_EQ(st.next(), 0x06c45d188009454fULL);
}

TEST(Rng, BelowStaysInRange) {
  rng::Stream st(5);
  for (int i = 0; i < 10000; ++i) EXPECT_LT(st.below(7), 7u);
}

// ---- spec and init ----

TEST(MlpInit, ParameterCountTwoOne) {
  const auto spec = make_spec({2, 1}, Activation::identity, LossKind::mse);
  const auto w = mlp_init(spec, 123);
  ASSERT_EQ(w.dim(), 3u);
  EXPECT_EQ(w[2], 0.0);
}

TEST(MlpInit, ParameterCountThreeLayers) {
  const auto spec = make_spec({4, 8, 3}, Activation::relu, LossKind::cross_entropy_softmax);
  EXPECT_EQ(spec.parameter_count(), 67u);
  EXPECT_EQ(mlp_init(spec, 0).dim(), 67u);
}

TEST(MlpInit, DeterministicPerSeed) {
  const auto spec = make_spec({4, 8, 3}, Activation::relu, LossKind::cross_entropy_softmax);
  EXPECT_TRUE(bit_equal(mlp_init(spec, 9), mlp_init(spec, 9)));
  EXPECT_FALSE(bit_equal(mlp_init(spec, 9), mlp_init(spec, 10)));
}

TEST(MlpInit, GlorotRangeAndZeroBias) {
  const auto spec = make_spec({4, 8, 3}, Activation::relu, LossKind::cross_entropy_softmax);
  const auto w = mlp_init(spec, 4);
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t j = 0; j < in * out; ++j) {
      EXPECT_LE(std::fabs(w[spec.weight_offset(l) + j]), limit);
    }
    for (std::size_t o = 0; o < out; ++o) EXPECT_EQ(w[spec.bias_offset(l) + o], 0.0);
  }
}

TEST(MlpSpec, RejectsInvalidShapes) {
  EXPECT_THROW(make_spec({3}, Activation::relu, LossKind::mse).validate(), ConfigError);
  EXPECT_THROW(make_spec({3, 0, 1}, Activation::relu, LossKind::mse).validate(), ConfigError);
  EXPECT_THROW(make_spec({3, 2}, Activation::relu, LossKind::logistic_binary).validate(),
               ConfigError);
  EXPECT_THROW(make_spec({3, 1}, Activation::relu, LossKind::cross_entropy_softmax).validate(),
               ConfigError);
}

TEST(MlpSpec, BiasFreeCount) {
  const auto spec = make_spec({4, 8, 3}, Activation::relu, LossKind::mse, false);
  EXPECT_EQ(spec.parameter_count(), 56u);
}

// ---- forward ----

TEST(MlpForward, ZeroWeightsGiveZeroLogits) {
  const auto spec = make_spec({3, 5, 2}, Activation::tanh, LossKind::cross_entropy_softmax);
  const WeightVector w(spec.parameter_count(), 0.0);
  const Matrix x{2, 3, {1, -2, 3, 0.5, 0.25, -4}};
  const Matrix z = mlp_forward(w, spec, x);
  for (double v : z.data) EXPECT_EQ(v, 0.0);
}

TEST(MlpForward, AffineScalar) {
  const auto spec = make_spec({1, 1}, Activation::identity, LossKind::mse);
  const WeightVector w(std::vector<double>{2.0, 1.0});
  const Matrix z = mlp_forward(w, spec, Matrix{1, 1, {3.0}});
  EXPECT_EQ(z(0, 0), 7.0);
}

TEST(MlpForward, HandEvaluatedReluNetwork) {
  // Layer 0: W = [[1, -2], [0.5, 1]], b = [0.5, 0.25]; layer 1: W = [[3, -2]], b = [0.25].
  // x = (1, -1): z1 = (1 + 2 + 0.5, 0.5 - 1 + 0.25) = (3.5, -0.25); relu -> (3.5, 0);
  // output = 3 * 3.5 - 2 * 0 + 0.25 = 10.75.
  const auto spec = make_spec({2, 2, 1}, Activation::relu, LossKind::mse);
  const WeightVector w(std::vector<double>{1, -2, 0.5, 1, 0.5, 0.25, 3, -2, 0.25});
  const Matrix z = mlp_forward(w, spec, Matrix{1, 2, {1.0, -1.0}});
  EXPECT_EQ(z(0, 0), 10.75);
}

TEST(MlpForward, DimensionMismatchNamesLayer) {
  const auto spec = make_spec({2, 2, 1}, Activation::relu, LossKind::mse);
  try {
    mlp_forward(WeightVector(8), spec, Matrix{1, 2, {1.0, 1.0}});
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
  try {
    mlp_forward(WeightVector(9), spec, Matrix{1, 3, {1.0, 1.0, 1.0}});
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos) << e.what();
  }
}

// ---- losses ----

TEST(Loss, PerfectFitMse) {
  const auto spec = make_spec({1, 1}, Activation::identity, LossKind::mse);
  const Dataset data(std::vector<double>{1, 2, 3}, 1, std::vector<double>{3, 5, 7}, 1);
  const auto r = loss_and_grad(WeightVector(std::vector<double>{2.0, 1.0}), spec, data);
  EXPECT_EQ(r.loss, 0.0);
  for (double g : r.grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(Loss, UniformSoftmaxIsLogTwo) {
  const auto spec = make_spec({3, 2}, Activation::identity, LossKind::cross_entropy_softmax);
  const Dataset data(std::vector<double>{1, 2, 3, -1, 0, 4}, 3, std::vector<double>{0, 1}, 1);
  const auto r = loss_and_grad(WeightVector(spec.parameter_count(), 0.0), spec, data);
  EXPECT_NEAR(r.loss, std::numbers::ln2, 1e-15);
}

TEST(Loss, StableForLargeLogits) {
  const auto spec = make_spec({1, 2}, Activation::identity, LossKind::cross_entropy_softmax);
  const Dataset data(std::vector<double>{1.0}, 1, std::vector<double>{0}, 1);
  // Logits (1000, 0): loss ~ 0 for label 0, no overflow.
  const auto r = loss_and_grad(WeightVector(std::vector<double>{1000, 0, 0, 0}), spec, data);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, 0.0, 1e-300);
}

TEST(Loss, NonFiniteDiagnosticNamesLayer) {
  const auto spec = make_spec({1, 3, 1}, Activation::identity, LossKind::mse);
  WeightVector w(spec.parameter_count(), 0.0);
  w[0] = std::numeric_limits<double>::infinity();
  const Dataset data(std::vector<double>{1.0}, 1, std::vector<double>{0.0}, 1);
  try {
    loss_and_grad(w, spec, data);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
}

TEST(Loss, RejectsOutOfRangeLabels) {
  const auto spec = make_spec({1, 2}, Activation::identity, LossKind::cross_entropy_softmax);
  const Dataset data(std::vector<double>{1.0}, 1, std::vector<double>{2}, 1);
  EXPECT_THROW(loss_and_grad(WeightVector(4), spec, data), ConfigError);
}

TEST(Loss, GradientMatchesQuadFiniteDifferences) {
  // 100 random specs no larger than [8,8,4], batches up to 16 rows.
  const Activation acts[] = {Activation::relu, Activation::tanh, Activation::identity};
  const LossKind losses[] = {LossKind::cross_entropy_softmax, LossKind::mse,
                             LossKind::logistic_binary};
  rng::Stream st(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const LossKind loss = losses[trial % 3];
    const std::size_t in = 1 + st.below(8);
    const std::size_t hidden = 1 + st.below(8);
    std::size_t out = loss == LossKind::logistic_binary ? 1 : 2 + st.below(3);
    if (loss == LossKind::mse) out = 1 + st.below(4);
    const bool deep = st.below(2) == 1;
    std::vector<std::size_t> sizes = deep ? std::vector<std::size_t>{in, hidden, out}
                                          : std::vector<std::size_t>{in, out};
    const auto spec = make_spec(sizes, acts[st.below(3)], loss, st.below(4) != 0);
    const Dataset data = random_dataset(spec, 1 + st.below(16), st.next());
    WeightVector w = mlp_init(spec, st.next());
    for (std::size_t j = 0; j < w.dim(); ++j) w[j] += 0.1 * st.normal();

    const auto analytic = loss_and_grad(w, spec, data);
    const auto fd = quad_oracle::central_difference(
        [&](const std::vector<quad_oracle::quad>& x) {
          return quad_oracle::mean_loss(x, spec, data);
        },
        quad_oracle::to_quad(w.values()), quad_oracle::quad(1e-12));
    EXPECT_TRUE(close_coordinates(analytic.grad.vec(), fd, 1e-6, 1e-8)) << "trial " << trial;
    EXPECT_NEAR(analytic.loss,
                static_cast<double>(quad_oracle::mean_loss(quad_oracle::to_quad(w.values()),
                                                           spec, data)),
                1e-12 * (1.0 + std::fabs(analytic.loss)));
  }
}

TEST(Loss, BitIdenticalAcrossCalls) {
  const auto spec = make_spec({5, 7, 3}, Activation::tanh, LossKind::cross_entropy_softmax);
  const Dataset data = random_dataset(spec, 16, 3);
  const auto w = mlp_init(spec, 11);
  const auto a = loss_and_grad(w, spec, data);
  const auto b = loss_and_grad(w, spec, data);
  EXPECT_EQ(std::bit_cast<std::uint64_t>(a.loss), std::bit_cast<std::uint64_t>(b.loss));
  EXPECT_TRUE(bit_equal(a.grad, b.grad));
}

TEST(Loss, SingleLayerLogisticIsConvex) {
  const auto spec = make_spec({4, 1}, Activation::identity, LossKind::logistic_binary);
  const Dataset data = random_dataset(spec, 32, 17);
  rng::Stream st(99);
  for (int trial = 0; trial < 500; ++trial) {
    WeightVector w1(spec.parameter_count()), w2(spec.parameter_count()), mid(spec.parameter_count());
    const double lambda = st.uniform();
    for (std::size_t j = 0; j < w1.dim(); ++j) {
      w1[j] = 3.0 * st.normal();
      w2[j] = 3.0 * st.normal();
      mid[j] = lambda * w1[j] + (1.0 - lambda) * w2[j];
    }
    EXPECT_LE(mean_loss(mid, spec, data),
              lambda * mean_loss(w1, spec, data) + (1.0 - lambda) * mean_loss(w2, spec, data) +
                  1e-12);
  }
}

TEST(Evaluate, AccuracyAndMseNaN) {
  const auto spec = make_spec({1, 2}, Activation::identity, LossKind::cross_entropy_softmax);
  const Dataset data(std::vector<double>{1.0, -1.0}, 1, std::vector<double>{0, 1}, 1);
  // Logit 0 = x, logit 1 = -x: row 0 -> class 0, row 1 -> class 1.
  const auto e = evaluate(WeightVector(std::vector<double>{1, -1, 0, 0}), spec, data);
  EXPECT_EQ(e.accuracy, 1.0);
  const auto mse = make_spec({1, 1}, Activation::identity, LossKind::mse);
  EXPECT_TRUE(std::isnan(evaluate(WeightVector(2), mse, data).accuracy));
}
