// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include <Eigen/Dense>

namespace tldg {

// Steps are 1-indexed: beta(1) .. beta(n). alpha_bar(0) = 1.
class DiffusionSchedule {
 public:
  DiffusionSchedule() = default;
  explicit DiffusionSchedule(std::vector<double> betas);
  static DiffusionSchedule linear(int n_steps, double beta_start = 1e-4, double beta_end = 0.02);

  int n_steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const;
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const;  // t in [0, n]
  const std::vector<double>& betas() const { return betas_; }

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bar_;  // index 0 holds 1
};

// z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps, 1 <= t <= n.
Eigen::VectorXd q_sample(const DiffusionSchedule& s, const Eigen::VectorXd& z0, int t,
                         const Eigen::VectorXd& eps);

// Noise-free reverse step t -> t-1 (posterior mean given predicted noise).
Eigen::VectorXd reverse_mean(const DiffusionSchedule& s, const Eigen::VectorXd& z_t, int t,
                             const Eigen::VectorXd& eps_hat);

// The two coefficients of reverse_mean: z_{t-1} = c_z * z_t - c_eps * eps_hat.
struct ReverseCoeffs {
  double c_z;
  double c_eps;
};
ReverseCoeffs reverse_coeffs(const DiffusionSchedule& s, int t);

}  // namespace tldg
