// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <doctest.h>

#include "gradcheck.hpp"
#include "tldg/error.hpp"
#include "tldg/ops.hpp"
#include "tldg/tmixup.hpp"

using namespace tldg;
using tldg::testing::gradcheck;
using tldg::testing::random_tensor;

namespace {

PoolingWeights weights_for(const Eigen::Vector3d& w) {
  PoolingWeights p;
  p.logits = w.array().max(1e-300).log().matrix();
  return p;
}

}  // namespace

TEST_CASE("pooling weights are a softmax") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    PoolingWeights p;
    p.logits = Eigen::Vector3d(g(rng), g(rng), g(rng));
    const auto w = p.weights();
    CHECK(std::abs(w.sum() - 1.0) < 1e-6);
    CHECK(w.minCoeff() >= 0.0);
  }
  PoolingWeights big;
  big.logits = Eigen::Vector3d(1000.0, 0.0, -1000.0);
  CHECK(big.weights()[0] == doctest::Approx(1.0));
}

TEST_CASE("one-hot column pooling") {
  Eigen::MatrixXd col = Eigen::MatrixXd::Zero(4, 1);
  col(0, 0) = 1.0;
  CHECK(pool_time(col, weights_for({1, 0, 0}))[0] == doctest::Approx(1.0));
  CHECK(pool_time(col, weights_for({0, 1, 0}))[0] == doctest::Approx(0.25));
  CHECK(pool_time(col, weights_for({0, 0, 1}))[0] == doctest::Approx(0.6300).epsilon(1e-4));
  PoolingWeights uniform;
  CHECK(pool_time(col, uniform)[0] == doctest::Approx(0.6267).epsilon(1e-4));
}

TEST_CASE("average <= power <= max") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> rows(1, 16);
  for (int i = 0; i < 2000; ++i) {
    Eigen::MatrixXd c(rows(rng), 1);
    for (int f = 0; f < c.rows(); ++f) c(f, 0) = u(rng) < 0.3 ? 0.0 : u(rng);
    const auto p = pool_components(c, 3.0);
    CHECK(p(1, 0) <= p(2, 0) + 1e-15);
    CHECK(p(2, 0) <= p(0, 0) + 1e-15);
  }
  CHECK_THROWS_AS(pool_time(Eigen::MatrixXd::Constant(2, 2, -1.0), PoolingWeights{}), Error);
}

TEST_CASE("attention and hard mask") {
  const auto a = attention(Eigen::Vector3d(-1, 0, 1));
  CHECK(a[0] == doctest::Approx(0.2689).epsilon(1e-4));
  CHECK(a[1] == 0.5);
  CHECK(a[2] == doctest::Approx(0.7311).epsilon(1e-4));
  const auto m = hard_mask(Eigen::Vector2d(0.3, 0.6), 0.5);
  CHECK(m[0] == 0.0);
  CHECK(m[1] == 1.0);
  CHECK(hard_mask(Eigen::Vector2d(0.5, 0.51), 0.5) == Eigen::Vector2d(0.0, 1.0));
  CHECK(hard_mask(Eigen::Vector2d(0.3, 0.6), 0.1) == Eigen::Vector2d(1.0, 1.0));
  CHECK(hard_mask(Eigen::Vector2d(0.3, 0.6), 0.9) == Eigen::Vector2d(0.0, 0.0));
}

TEST_CASE("tmixup algebra") {
  Eigen::MatrixXd x(2, 3);
  x << 0.8, 0.1, 0.3, 0.5, 0.9, 0.2;
  CHECK(tmixup(x, Eigen::Vector3d::Ones(), 0.25) == x);
  CHECK(tmixup(x, Eigen::Vector3d::Zero(), 1.0) == x);
  const auto mixed = tmixup(x, Eigen::Vector3d(0, 1, 0), 0.25);
  CHECK(mixed(0, 0) == 0.2);
  CHECK(mixed(1, 0) == 0.25 * 0.5);
  CHECK(mixed.col(1) == x.col(1));
  CHECK(mixed(0, 2) == 0.25 * 0.3);
  CHECK_THROWS_AS(tmixup(x, Eigen::Vector2d::Ones(), 0.5), Error);
}

TEST_CASE("sampling ranges") {
  TMixupConfig cfg;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double tau = sample_tau(cfg, rng);
    CHECK(tau >= cfg.tau_low);
    CHECK(tau <= cfg.tau_high);
    const double lam = sample_lambda(cfg, rng);
    CHECK(lam >= 0.0);
    CHECK(lam <= 1.0);
  }
  TMixupConfig bad;
  bad.tau_low = 0.6;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.beta_alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("differentiable pooling matches the plain form and its gradient") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ag::Tensor spec = random_tensor({1, 8, 8}, seed, 0.0, 1.0);
    const ag::Tensor logits = random_tensor({3}, seed + 100, -1.0, 1.0);
    const auto pooled = pool_time(ag::Var::constant(spec), ag::Var::constant(logits), 3.0);
    Eigen::MatrixXd m(8, 8);
    for (int f = 0; f < 8; ++f)
      for (int t = 0; t < 8; ++t) m(f, t) = spec[f * 8 + t];
    PoolingWeights w;
    w.logits = Eigen::Vector3d(logits[0], logits[1], logits[2]);
    const auto ref = pool_time(m, w);
    for (int t = 0; t < 8; ++t) CHECK(pooled.value()[t] == doctest::Approx(ref[t]).epsilon(1e-12));

    const ag::Tensor probe = random_tensor({1, 8}, seed + 200);
    auto f = [&](const std::vector<ag::Var>& v) {
      return ag::sum(ag::mul_const(pool_time(ag::Var::constant(spec), v[0], 3.0), probe));
    };
    CHECK(gradcheck(f, {ag::Var::parameter(logits)}, 1e-6, 1e-6) < 1e-4);
  }
}

TEST_CASE("tmixup batch forward is the hard mask") {
  const ag::Tensor x = random_tensor({2, 1, 4, 6}, 9, 0.0, 1.0);
  const ag::Tensor pin = x.reshaped({2, 4, 6});
  TMixupParams params{ag::Var::parameter(ag::Tensor({3}, 0.0)), ag::Var::parameter(ag::Tensor({1}, 4.0)),
                      ag::Var::parameter(ag::Tensor({1}, -2.0))};
  TMixupDraw draw{0.5, {0.3, 0.7}};
  ag::Tensor masks;
  const auto out = tmixup_batch(ag::Var::constant(x), pin, params, 3.0, draw, &masks);
  for (int n = 0; n < 2; ++n)
    for (int f = 0; f < 4; ++f)
      for (int t = 0; t < 6; ++t) {
        const std::size_t i = static_cast<std::size_t>((n * 4 + f) * 6 + t);
        const double m = masks[static_cast<std::size_t>(n * 6 + t)];
        CHECK((m == 0.0 || m == 1.0));
        CHECK(out.value()[i] == (m == 1.0 ? x[i] : draw.lambda[n] * x[i]));
      }
  // Straight-through: the attention parameters receive a gradient.
  const auto g = ag::grad(ag::sum(out), {params.a, params.b, params.logits});
  CHECK(std::isfinite(g[0].item()));
  CHECK(g[1].value()[0] != 0.0);
}
