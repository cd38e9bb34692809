#include "doctest.h"

#include <cmath>
#include <random>

#include "tabulatime/errors.hpp"
#include "tabulatime/fusion.hpp"
#include "tabulatime/tensor.hpp"
#include "testutil.hpp"

using namespace tabulatime;

TEST_CASE("pool_series averages the embedding axis per (channel, step)") {
  // (B=1, N=2, T=2, C=3): each token's slot is its embedding mean.
  Tensor f = Tensor::zeros({1, 2, 2, 3});
  double vals[] = {1, 2, 3, /**/ 4, 5, 6, /**/ -1, 0, 1, /**/ 10, 10, 10};
  for (int i = 0; i < 12; ++i) f.raw()[i] = vals[i];
  Tensor pooled = pool_series(f);
  REQUIRE(pooled.shape() == Shape({1, 4}));
  CHECK(pooled.data()[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(pooled.data()[1] == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(pooled.data()[2] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(pooled.data()[3] == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("fuse applies a sigmoid gate computed from the features") {
  AttentionGateParams params;
  params.w1 = Tensor::zeros({2, 1});
  params.w1.raw() = {1.0, 0.0};
  params.w2 = Tensor::zeros({1, 2});
  params.w2.raw() = {2.0, -1.0};
  Tensor x = Tensor::zeros({1, 2});
  x.raw() = {1.0, 3.0};
  // hidden = relu(1*1 + 3*0) = 1; pre-gate = (2, -1).
  FuseResult result = fuse(x, params);
  const double g0 = 1.0 / (1.0 + std::exp(-2.0));
  const double g1 = 1.0 / (1.0 + std::exp(1.0));
  CHECK(result.gate.data()[0] == doctest::Approx(g0).epsilon(1e-12));
  CHECK(result.gate.data()[1] == doctest::Approx(g1).epsilon(1e-12));
  CHECK(result.fused.data()[0] == doctest::Approx(1.0 * g0).epsilon(1e-12));
  CHECK(result.fused.data()[1] == doctest::Approx(3.0 * g1).epsilon(1e-12));
}

TEST_CASE("fuse gate stays in (0,1) and zero input stays zero") {
  std::mt19937_64 rng(7);
  auto params = AttentionGateParams::init(6, 2, rng);
  Tensor x = testutil::random_tensor({5, 6}, 11, -3.0, 3.0);
  FuseResult result = fuse(x, params);
  for (double g : result.gate.data()) {
    CHECK(g > 0.0);
    CHECK(g < 1.0);
  }
  Tensor zero = Tensor::zeros({2, 6});
  FuseResult zr = fuse(zero, params);
  for (double v : zr.fused.data()) CHECK(v == 0.0);
  // No biases anywhere, so the zero row's gate is exactly sigmoid(0).
  for (double g : zr.gate.data()) CHECK(g == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("gate bottleneck defaults to a quarter of the feature width") {
  std::mt19937_64 rng(3);
  auto params = AttentionGateParams::init(10, 0, rng);
  CHECK(params.w1.shape() == Shape({10, 3}));  // ceil(10/4)
  CHECK(params.w2.shape() == Shape({3, 10}));
  auto exact = AttentionGateParams::init(8, 0, rng);
  CHECK(exact.w1.shape() == Shape({8, 2}));
}

TEST_CASE("mlp head computes relu(x w1 + b1) w2 + b2") {
  MlpHead head;
  head.w1 = Tensor::zeros({2, 2});
  head.w1.raw() = {1.0, 0.0, 0.0, 1.0};
  head.b1 = Tensor::zeros({2});
  head.b1.raw() = {0.5, -10.0};
  head.w2 = Tensor::zeros({2, 1});
  head.w2.raw() = {1.0, 2.0};
  head.b2 = Tensor::zeros({1});
  head.b2.raw() = {0.25};
  Tensor x = Tensor::zeros({1, 2});
  x.raw() = {1.0, 2.0};
  // hidden = relu(1.5, -8) = (1.5, 0) -> 1.5 + 0.25.
  Tensor y = head.forward(x);
  REQUIRE(y.shape() == Shape({1, 1}));
  CHECK(y.item() == doctest::Approx(1.75).epsilon(1e-12));
}

TEST_CASE("forecast head shares one projection across channels") {
  std::mt19937_64 rng(19);
  auto head = ForecastHead::init(2 * 3, 4, rng);  // T=2, C=3, H=4
  Tensor f = testutil::random_tensor({2, 2, 2, 3}, 23, -1.0, 1.0);
  // Copy channel 0's block into channel 1 for sample 0.
  for (int t = 0; t < 2; ++t) {
    for (int c = 0; c < 3; ++c) {
      f.raw()[(0 * 2 + 1) * 6 + t * 3 + c] = f.raw()[(0 * 2 + 0) * 6 + t * 3 + c];
    }
  }
  Tensor out = forecast_outputs(f, head);
  REQUIRE(out.shape() == Shape({2, 2, 4}));
  for (int h = 0; h < 4; ++h) {
    CHECK(out.data()[0 * 8 + 0 * 4 + h] ==
          doctest::Approx(out.data()[0 * 8 + 1 * 4 + h]).epsilon(1e-12));
  }
  // Channel 0, sample 0 against a hand matmul.
  for (int h = 0; h < 4; ++h) {
    double acc = head.b.data()[static_cast<std::size_t>(h)];
    for (int k = 0; k < 6; ++k) {
      acc += f.data()[static_cast<std::size_t>(k)] *
             head.w.data()[static_cast<std::size_t>(k * 4 + h)];
    }
    CHECK(out.data()[static_cast<std::size_t>(h)] ==
          doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("fd: gradients through pool, fuse, and the mlp head") {
  std::mt19937_64 rng(41);
  auto gate = AttentionGateParams::init(4, 2, rng);
  auto head = MlpHead::init(4, 3, 2, rng);
  Tensor x = testutil::random_tensor({2, 2, 1, 2}, 5, -1.0, 1.0, true);
  auto forward = [&]() {
    Tensor pooled = pool_series(x);  // (2, 2)
    Tensor joint = concat_cols({pooled, pooled});  // (2, 4)
    FuseResult fused = fuse(joint, gate);
    return mean_all(head.forward(fused.fused));
  };
  auto report = testutil::grad_check(forward, {{"x", x},
                                               {"gate.w1", gate.w1},
                                               {"gate.w2", gate.w2},
                                               {"head.w1", head.w1},
                                               {"head.b1", head.b1},
                                               {"head.w2", head.w2},
                                               {"head.b2", head.b2}});
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("fd: gradients through the forecast readout") {
  std::mt19937_64 rng(43);
  auto head = ForecastHead::init(6, 3, rng);
  Tensor f = testutil::random_tensor({2, 2, 2, 3}, 29, -1.0, 1.0, true);
  auto forward = [&]() { return mean_all(forecast_outputs(f, head)); };
  auto report = testutil::grad_check(
      forward, {{"f", f}, {"head.w", head.w}, {"head.b", head.b}});
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("pool and forecast reject mis-shaped features") {
  Tensor flat = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(pool_series(flat), DimensionError);
  ForecastHead head;
  head.w = Tensor::zeros({5, 2});
  head.b = Tensor::zeros({2});
  Tensor f = Tensor::zeros({1, 1, 2, 3});  // T*C = 6, head expects 5
  CHECK_THROWS_AS(forecast_outputs(f, head), DimensionError);
}
