// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

// Layers, spectral normalization and Adam on top of the autograd engine.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tldg/autograd.hpp"
#include "tldg/ops.hpp"

namespace tldg::nn {

using ag::Shape;
using ag::Tensor;
using ag::Var;
using Rng = std::mt19937_64;

// Ordered name -> parameter table. Vars share storage, so updating a value
// through the table updates the layer that owns it.
class ParamTable {
 public:
  Var add(const std::string& name, Tensor init);
  const std::vector<std::pair<std::string, Var>>& items() const { return items_; }
  std::vector<Var> vars() const;
  Var get(const std::string& name) const;
  std::size_t count() const;  // total scalar parameters

 private:
  std::vector<std::pair<std::string, Var>> items_;
};

// U(-b, b) with b = gain * sqrt(3 / fan_in).
Tensor uniform_init(const Shape& shape, int fan_in, double gain, Rng& rng);

struct Linear {
  Var w;  // [in, out]
  Var b;  // [out]
  int in = 0;
  int out = 0;

  Linear() = default;
  Linear(ParamTable& params, const std::string& name, int in, int out, Rng& rng, double gain = 1.0);
  Var operator()(const Var& x) const { return forward(x, w); }
  Var forward(const Var& x, const Var& weight) const;
};

struct Conv2d {
  Var w;  // [out, in, k, k]
  Var b;  // [out]
  ag::ConvGeom geom;

  Conv2d() = default;
  Conv2d(ParamTable& params, const std::string& name, int in, int out, ag::ConvGeom g, Rng& rng,
         double gain = 1.0);
  Var operator()(const Var& x) const { return forward(x, w); }
  Var forward(const Var& x, const Var& weight) const;
};

// Transposed convolution; weight laid out [in, out, k, k] so that it is the
// x-adjoint of a Conv2d from `out` to `in` channels.
struct ConvTranspose2d {
  Var w;
  Var b;
  ag::ConvGeom geom;

  ConvTranspose2d() = default;
  ConvTranspose2d(ParamTable& params, const std::string& name, int in, int out, ag::ConvGeom g,
                  Rng& rng, double gain = 1.0);
  Var operator()(const Var& x) const;  // output size (in - 1) * stride - 2 pad + k
};

// W / sigma(W) with sigma estimated by power iteration on W viewed as
// [rows, numel / rows]. The singular vectors are held constant in the graph,
// so gradients flow through sigma = u^T W v.
class SpectralNorm {
 public:
  SpectralNorm() = default;
  SpectralNorm(Var weight, int rows, Rng& rng);

  Var normalized() const;
  // Power iteration until the relative change of sigma drops below tol.
  // Returns the number of iterations used.
  int refresh(double tol = 1e-12, int max_iter = 1000);
  double sigma() const { return sigma_; }
  Eigen::MatrixXd matrix() const;  // current raw weight as [rows, cols]
  const Eigen::VectorXd& u() const { return u_; }
  const Eigen::VectorXd& v() const { return v_; }
  void set_state(Eigen::VectorXd u, Eigen::VectorXd v, double sigma);
  const Var& weight() const { return w_; }

 private:
  Var w_;
  int rows_ = 0;
  int cols_ = 0;
  Eigen::VectorXd u_;
  Eigen::VectorXd v_;
  double sigma_ = 1.0;
};

// Top singular value via a full SVD; used to audit the power iteration.
double top_singular_value(const Eigen::MatrixXd& m);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Var> params, AdamConfig cfg);

  void step(const std::vector<Var>& grads);
  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

  // Moments, flattened in parameter order, for checkpointing.
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  std::vector<Var> params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t t_ = 0;
};

// Sinusoidal embedding of integer steps, [N, dim] (dim even).
Tensor timestep_embedding(const std::vector<int>& t, int dim);

}  // namespace tldg::nn
