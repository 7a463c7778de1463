// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

// Temporal mixup: weighted max/avg/power pooling over frequency, a sigmoid
// attention map over time, a random-threshold hard mask and a self-mix of
// the spectrogram with its masked copy. Training-time only.

#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "tldg/autograd.hpp"
#include "tldg/features.hpp"

namespace tldg {

struct PoolingWeights {
  Eigen::Vector3d logits = Eigen::Vector3d::Zero();  // (max, avg, pow)
  double power_p = 3.0;

  Eigen::Vector3d weights() const;  // softmax(logits)
};

struct AttentionAffine {
  double a = 1.0;
  double b = 0.0;
};

struct TMixupConfig {
  bool enabled = true;
  double tau_low = 0.2;
  double tau_high = 0.5;
  double beta_alpha = 0.5;
  double power_p = 3.0;

  void validate() const;  // throws invalid_config
};

// Column-wise pooling of an F x T matrix; entries must be nonnegative.
Eigen::VectorXd pool_time(const Eigen::MatrixXd& spec, const PoolingWeights& w);
Eigen::VectorXd pool_time(const LogMelSpec& spec, const PoolingWeights& w);

// The three pools separately, as rows (max, avg, pow) of a 3 x T matrix.
Eigen::MatrixXd pool_components(const Eigen::MatrixXd& spec, double power_p);

Eigen::VectorXd attention(const Eigen::VectorXd& pooled, const AttentionAffine& affine = {});

Eigen::VectorXd hard_mask(const Eigen::VectorXd& att, double tau);

// mask[t] = 1 keeps the column; mask[t] = 0 scales it by lam.
Eigen::MatrixXd tmixup(const Eigen::MatrixXd& spec, const Eigen::VectorXd& mask, double lam);
LogMelSpec tmixup(const LogMelSpec& spec, const Eigen::VectorXd& mask, double lam);

double sample_tau(const TMixupConfig& cfg, std::mt19937_64& rng);
double sample_lambda(const TMixupConfig& cfg, std::mt19937_64& rng);  // Beta(alpha, alpha)

// ---------------------------------------------------------------------------
// Differentiable forms used by the trainer.

struct TMixupParams {
  ag::Var logits;  // [3]
  ag::Var a;       // [1]
  ag::Var b;       // [1]
};

// spec [N, F, T] (nonnegative) -> [N, T].
ag::Var pool_time(const ag::Var& spec, const ag::Var& logits, double power_p);

struct TMixupDraw {
  double tau = 0.5;
  std::vector<double> lambda;  // one per sample
};

// x [N, 1, F, T]; pool_input [N, F, T] is the per-spectrogram min-max
// normalized copy used for attention. The hard mask passes gradients to the
// attention straight through. Returns the mixed batch; the hard masks are
// written to *masks ([N, T]) when given.
ag::Var tmixup_batch(const ag::Var& x, const ag::Tensor& pool_input, const TMixupParams& params,
                     double power_p, const TMixupDraw& draw, ag::Tensor* masks = nullptr);

}  // namespace tldg
