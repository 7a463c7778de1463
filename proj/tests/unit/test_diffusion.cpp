// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <doctest.h>

#include "tldg/diffusion.hpp"
#include "tldg/error.hpp"

using namespace tldg;

TEST_CASE("schedule") {
  const auto s = DiffusionSchedule::linear(10, 1e-4, 0.02);
  CHECK(s.n_steps() == 10);
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(s.beta(1) == doctest::Approx(1e-4));
  CHECK(s.beta(10) == doctest::Approx(0.02));
  double prod = 1.0;
  for (int t = 1; t <= 10; ++t) {
    prod *= 1.0 - s.beta(t);
    CHECK(s.alpha_bar(t) == doctest::Approx(prod).epsilon(1e-14));
    CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
  }
  CHECK_THROWS_AS(s.beta(0), Error);
  CHECK_THROWS_AS(s.alpha_bar(11), Error);
  CHECK_THROWS_AS(DiffusionSchedule({0.5, 1.0}), Error);
}

TEST_CASE("q_sample spot check") {
  // One step with beta 0.36 gives alpha_bar 0.64.
  const DiffusionSchedule s({0.36});
  const auto z = q_sample(s, Eigen::Vector2d(1, 0), 1, Eigen::Vector2d(0, 1));
  CHECK(z[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(z[1] == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("forward marginal variance") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  const auto s = DiffusionSchedule::linear(100, 1e-4, 0.05);
  const Eigen::VectorXd z0 = Eigen::VectorXd::Constant(1, 0.7);
  for (int t : {1, 30, 100}) {
    const int draws = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double v = q_sample(s, z0, t, Eigen::VectorXd::Constant(1, g(rng)))[0];
      sum += v;
      sq += v * v;
    }
    const double mean = sum / draws;
    const double var = sq / draws - mean * mean;
    CHECK(std::abs(var - (1.0 - s.alpha_bar(t))) < 2e-2);
    CHECK(std::abs(mean - std::sqrt(s.alpha_bar(t)) * 0.7) < 2e-2);
  }
}

TEST_CASE("reverse step inverts the forward step with the true noise") {
  const auto s = DiffusionSchedule::linear(20);
  const Eigen::Vector3d z0(0.2, -1.0, 0.5);
  const Eigen::Vector3d eps(0.3, 0.1, -0.7);
  // From t=1 the posterior mean with the true noise returns z0 exactly.
  const auto z1 = q_sample(s, z0, 1, eps);
  const auto back = reverse_mean(s, z1, 1, eps);
  CHECK((back - z0).norm() < 1e-12);
  const auto c = reverse_coeffs(s, 5);
  CHECK(c.c_z == doctest::Approx(1.0 / std::sqrt(s.alpha(5))));
  CHECK(c.c_eps == doctest::Approx(s.beta(5) / std::sqrt(s.alpha(5) * (1.0 - s.alpha_bar(5)))));
}
