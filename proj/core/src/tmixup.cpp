// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/tmixup.hpp"

#include <algorithm>
#include <cmath>

#include "tldg/error.hpp"
#include "tldg/ops.hpp"

namespace tldg {

Eigen::Vector3d PoolingWeights::weights() const {
  const Eigen::Vector3d e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

void TMixupConfig::validate() const {
  if (!(tau_low >= 0.0 && tau_low < tau_high && tau_high <= 1.0))
    fail(Errc::invalid_config, "tmixup: need 0 <= tau_low < tau_high <= 1");
  if (!(beta_alpha > 0.0)) fail(Errc::invalid_config, "tmixup: beta_alpha must be positive");
  if (!(power_p > 1.0)) fail(Errc::invalid_config, "tmixup: power_p must exceed 1");
}

Eigen::MatrixXd pool_components(const Eigen::MatrixXd& spec, double power_p) {
  if (spec.size() == 0) fail(Errc::invalid_input, "pool_time: empty spectrogram");
  if (spec.minCoeff() < 0.0)
    fail(Errc::invalid_input, "pool_time: negative entries (normalize to minmax01 first)");
  const double f = static_cast<double>(spec.rows());
  Eigen::MatrixXd out(3, spec.cols());
  for (Eigen::Index t = 0; t < spec.cols(); ++t) {
    const auto col = spec.col(t);
    out(0, t) = col.maxCoeff();
    out(1, t) = col.sum() / f;
    // Power mean lies between the mean and the max; clamp off rounding.
    const double pm = std::pow(col.array().pow(power_p).sum() / f, 1.0 / power_p);
    out(2, t) = std::clamp(pm, out(1, t), out(0, t));
  }
  return out;
}

Eigen::VectorXd pool_time(const Eigen::MatrixXd& spec, const PoolingWeights& w) {
  return pool_components(spec, w.power_p).transpose() * w.weights();
}

Eigen::VectorXd pool_time(const LogMelSpec& spec, const PoolingWeights& w) {
  return pool_time(spec.values, w);
}

Eigen::VectorXd attention(const Eigen::VectorXd& pooled, const AttentionAffine& affine) {
  return pooled.unaryExpr([&](double x) { return 1.0 / (1.0 + std::exp(-(affine.a * x + affine.b))); });
}

Eigen::VectorXd hard_mask(const Eigen::VectorXd& att, double tau) {
  return att.unaryExpr([tau](double x) { return x > tau ? 1.0 : 0.0; });
}

Eigen::MatrixXd tmixup(const Eigen::MatrixXd& spec, const Eigen::VectorXd& mask, double lam) {
  if (mask.size() != spec.cols())
    fail(Errc::invalid_input, "tmixup: mask length does not match frame count");
  if (!(lam >= 0.0 && lam <= 1.0)) fail(Errc::invalid_input, "tmixup: lambda outside [0, 1]");
  Eigen::MatrixXd out = spec;
  for (Eigen::Index t = 0; t < spec.cols(); ++t)
    if (mask[t] == 0.0) out.col(t) *= lam;
  return out;
}

LogMelSpec tmixup(const LogMelSpec& spec, const Eigen::VectorXd& mask, double lam) {
  LogMelSpec out = spec;
  out.values = tmixup(spec.values, mask, lam);
  return out;
}

double sample_tau(const TMixupConfig& cfg, std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(cfg.tau_low, cfg.tau_high)(rng);
}

double sample_lambda(const TMixupConfig& cfg, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(cfg.beta_alpha, 1.0);
  const double x = g(rng);
  const double y = g(rng);
  return x + y > 0.0 ? x / (x + y) : 0.5;
}

// ---------------------------------------------------------------------------

ag::Var pool_time(const ag::Var& spec, const ag::Var& logits, double power_p) {
  using namespace ag;
  if (spec.value().rank() != 3) fail(Errc::invalid_input, "pool_time expects [N, F, T]");
  const int n = spec.value().dim(0), f = spec.value().dim(1), t = spec.value().dim(2);
  const Tensor& v = spec.value();
  Tensor onehot(spec.shape(), 0.0);
  for (int s = 0; s < n; ++s)
    for (int j = 0; j < t; ++j) {
      int best = 0;
      for (int i = 1; i < f; ++i) {
        const std::size_t idx = (static_cast<std::size_t>(s) * f + i) * t + j;
        if (v[idx] < 0.0) fail(Errc::invalid_input, "pool_time: negative entries");
        if (v[idx] > v[(static_cast<std::size_t>(s) * f + best) * t + j]) best = i;
      }
      if (v[(static_cast<std::size_t>(s) * f) * t + j] < 0.0) fail(Errc::invalid_input, "pool_time: negative entries");
      onehot[(static_cast<std::size_t>(s) * f + best) * t + j] = 1.0;
    }
  Var mx = axis_sum(mul_const(spec, onehot), 1);
  Var avg = scale(axis_sum(spec, 1), 1.0 / f);
  Var pw = pow_scalar(scale(axis_sum(pow_scalar(spec, power_p), 1), 1.0 / f), 1.0 / power_p);

  Tensor shift({3}, *std::max_element(logits.value().vec().begin(), logits.value().vec().end()));
  Var e = exp(add_const(logits, Tensor({3}, std::vector<double>(3, -shift[0]))));
  Var w = mul(e, broadcast_scalar(reciprocal(sum(e)), {3}));
  const Shape nt{n, t};
  return add(add(mul(broadcast_scalar(slice(w, 0, 0, 1), nt), mx),
                 mul(broadcast_scalar(slice(w, 0, 1, 1), nt), avg)),
             mul(broadcast_scalar(slice(w, 0, 2, 1), nt), pw));
}

ag::Var tmixup_batch(const ag::Var& x, const ag::Tensor& pool_input, const TMixupParams& params,
                     double power_p, const TMixupDraw& draw, ag::Tensor* masks) {
  using namespace ag;
  if (x.value().rank() != 4 || x.value().dim(1) != 1) fail(Errc::invalid_input, "tmixup_batch expects [N, 1, F, T]");
  const int n = x.value().dim(0), f = x.value().dim(2), t = x.value().dim(3);
  if (pool_input.shape() != Shape{n, f, t}) fail(Errc::invalid_input, "tmixup_batch: pool input shape mismatch");
  if (static_cast<int>(draw.lambda.size()) != n) fail(Errc::invalid_input, "tmixup_batch: one lambda per sample");

  Var pooled = pool_time(Var::constant(pool_input), params.logits, power_p);
  const Shape nt{n, t};
  Var att = sigmoid(add(mul(broadcast_scalar(params.a, nt), pooled), broadcast_scalar(params.b, nt)));

  // factor = 1 where the mask keeps a frame and lambda elsewhere; the
  // (1 - lambda) * (att - stop_grad(att)) term is zero in value.
  Tensor base(nt);
  Tensor keep(nt);
  Tensor gain(nt);
  for (int s = 0; s < n; ++s)
    for (int j = 0; j < t; ++j) {
      const std::size_t i = static_cast<std::size_t>(s) * t + j;
      keep[i] = att.value()[i] > draw.tau ? 1.0 : 0.0;
      base[i] = keep[i] == 1.0 ? 1.0 : draw.lambda[static_cast<std::size_t>(s)];
      gain[i] = 1.0 - draw.lambda[static_cast<std::size_t>(s)];
    }
  if (masks) *masks = keep;
  Var factor = add_const(mul_const(sub(att, att.detach()), gain), base);
  Var full = axis_broadcast(axis_broadcast(factor, 1, f), 1, 1);
  return mul(x, full);
}

}  // namespace tldg
