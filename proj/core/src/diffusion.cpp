// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/diffusion.hpp"

#include <cmath>
#include <string>

#include "tldg/error.hpp"

namespace tldg {

DiffusionSchedule::DiffusionSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) fail(Errc::invalid_config, "diffusion schedule needs at least one step");
  alpha_bar_.assign(betas_.size() + 1, 1.0);
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    if (!(betas_[i] > 0.0 && betas_[i] < 1.0))
      fail(Errc::invalid_config, "diffusion betas must lie in (0, 1)");
    alpha_bar_[i + 1] = alpha_bar_[i] * (1.0 - betas_[i]);
  }
}

DiffusionSchedule DiffusionSchedule::linear(int n_steps, double beta_start, double beta_end) {
  if (n_steps < 1) fail(Errc::invalid_config, "diffusion n_steps must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    fail(Errc::invalid_config, "linear schedule needs 0 < beta_start <= beta_end < 1");
  std::vector<double> b(static_cast<std::size_t>(n_steps));
  for (int i = 0; i < n_steps; ++i)
    b[static_cast<std::size_t>(i)] =
        n_steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / (n_steps - 1);
  return DiffusionSchedule(std::move(b));
}

double DiffusionSchedule::beta(int t) const {
  if (t < 1 || t > n_steps()) fail(Errc::invalid_input, "diffusion step " + std::to_string(t) + " out of range");
  return betas_[static_cast<std::size_t>(t - 1)];
}

double DiffusionSchedule::alpha_bar(int t) const {
  if (t < 0 || t > n_steps()) fail(Errc::invalid_input, "diffusion step " + std::to_string(t) + " out of range");
  return alpha_bar_[static_cast<std::size_t>(t)];
}

Eigen::VectorXd q_sample(const DiffusionSchedule& s, const Eigen::VectorXd& z0, int t,
                         const Eigen::VectorXd& eps) {
  if (t < 1 || t > s.n_steps())
    fail(Errc::invalid_input, "q_sample: step " + std::to_string(t) + " outside [1, " +
                                  std::to_string(s.n_steps()) + "]");
  if (z0.size() != eps.size()) fail(Errc::invalid_input, "q_sample: noise dimension mismatch");
  const double ab = s.alpha_bar(t);
  return std::sqrt(ab) * z0 + std::sqrt(1.0 - ab) * eps;
}

ReverseCoeffs reverse_coeffs(const DiffusionSchedule& s, int t) {
  const double a = s.alpha(t);
  const double ab = s.alpha_bar(t);
  return {1.0 / std::sqrt(a), s.beta(t) / (std::sqrt(a) * std::sqrt(1.0 - ab))};
}

Eigen::VectorXd reverse_mean(const DiffusionSchedule& s, const Eigen::VectorXd& z_t, int t,
                             const Eigen::VectorXd& eps_hat) {
  const ReverseCoeffs c = reverse_coeffs(s, t);
  return c.c_z * z_t - c.c_eps * eps_hat;
}

}  // namespace tldg
