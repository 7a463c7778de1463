// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/nn.hpp"

#include <cmath>

#include "tldg/error.hpp"

namespace tldg::nn {

Var ParamTable::add(const std::string& name, Tensor init) {
  for (const auto& [n, v] : items_)
    if (n == name) fail(Errc::invalid_state, "duplicate parameter name " + name);
  Var v = Var::parameter(std::move(init));
  items_.emplace_back(name, v);
  return v;
}

std::vector<Var> ParamTable::vars() const {
  std::vector<Var> out;
  out.reserve(items_.size());
  for (const auto& [n, v] : items_) out.push_back(v);
  return out;
}

Var ParamTable::get(const std::string& name) const {
  for (const auto& [n, v] : items_)
    if (n == name) return v;
  fail(Errc::invalid_state, "no parameter named " + name);
}

std::size_t ParamTable::count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : items_) n += v.size();
  return n;
}

Tensor uniform_init(const Shape& shape, int fan_in, double gain, Rng& rng) {
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(shape);
  for (double& x : t.vec()) x = dist(rng);
  return t;
}

Linear::Linear(ParamTable& params, const std::string& name, int in_, int out_, Rng& rng, double gain)
    : in(in_), out(out_) {
  w = params.add(name + ".w", uniform_init({in, out}, in, gain, rng));
  b = params.add(name + ".b", Tensor({out}, 0.0));
}

Var Linear::forward(const Var& x, const Var& weight) const {
  Var y = ag::matmul(x, weight);
  return ag::add(y, ag::channel_broadcast(b, y.shape()));
}

Conv2d::Conv2d(ParamTable& params, const std::string& name, int in, int out, ag::ConvGeom g, Rng& rng,
               double gain)
    : geom(g) {
  w = params.add(name + ".w", uniform_init({out, in, g.kh, g.kw}, in * g.kh * g.kw, gain, rng));
  b = params.add(name + ".b", Tensor({out}, 0.0));
}

Var Conv2d::forward(const Var& x, const Var& weight) const {
  Var y = ag::conv2d(x, weight, geom);
  return ag::add(y, ag::channel_broadcast(b, y.shape()));
}

ConvTranspose2d::ConvTranspose2d(ParamTable& params, const std::string& name, int in, int out,
                                 ag::ConvGeom g, Rng& rng, double gain)
    : geom(g) {
  // Each output pixel receives about in * k * k / stride^2 contributions.
  const int fan = std::max(1, in * g.kh * g.kw / (g.stride * g.stride));
  w = params.add(name + ".w", uniform_init({in, out, g.kh, g.kw}, fan, gain, rng));
  b = params.add(name + ".b", Tensor({out}, 0.0));
}

Var ConvTranspose2d::operator()(const Var& x) const {
  const int h = geom.transposed_h(x.value().dim(2));
  const int w_out = geom.transposed_w(x.value().dim(3));
  Var y = ag::conv_transpose2d(x, w, geom, h, w_out);
  return ag::add(y, ag::channel_broadcast(b, y.shape()));
}

// ---------------------------------------------------------------------------

SpectralNorm::SpectralNorm(Var weight, int rows, Rng& rng) : w_(std::move(weight)), rows_(rows) {
  cols_ = static_cast<int>(w_.size()) / rows_;
  if (rows_ * cols_ != static_cast<int>(w_.size()))
    fail(Errc::invalid_input, "spectral norm: rows do not divide the weight");
  std::normal_distribution<double> nd;
  u_.resize(rows_);
  for (int i = 0; i < rows_; ++i) u_[i] = nd(rng);
  u_.normalize();
  v_ = Eigen::VectorXd::Zero(cols_);
  refresh();
}

Eigen::MatrixXd SpectralNorm::matrix() const {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMat>(w_.value().data(), rows_, cols_);
}

int SpectralNorm::refresh(double tol, int max_iter) {
  // Power iteration from the previous u. When the top two singular values are
  // close it stalls, so fall back to a full SVD if it has not converged.
  const Eigen::MatrixXd m = matrix();
  double prev = 0.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    v_ = m.transpose() * u_;
    const double vn = v_.norm();
    if (vn == 0.0) {
      sigma_ = 0.0;
      return it + 1;
    }
    v_ /= vn;
    u_ = m * v_;
    sigma_ = u_.norm();
    u_ /= sigma_;
    const double resid = (m.transpose() * u_ - sigma_ * v_).norm();
    if (it > 0 && std::abs(sigma_ - prev) <= tol * sigma_ && resid <= 1e-9 * sigma_) return it + 1;
    prev = sigma_;
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  u_ = svd.matrixU().col(0);
  v_ = svd.matrixV().col(0);
  sigma_ = svd.singularValues()(0);
  return it;
}

Var SpectralNorm::normalized() const {
  if (sigma_ <= 0.0) return w_;
  Tensor outer(w_.shape());
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j)
      outer[static_cast<std::size_t>(i) * cols_ + j] = u_[i] * v_[j];
  Var sigma = ag::sum(ag::mul_const(w_, outer));
  return ag::mul(w_, ag::broadcast_scalar(ag::reciprocal(sigma), w_.shape()));
}

void SpectralNorm::set_state(Eigen::VectorXd u, Eigen::VectorXd v, double sigma) {
  if (u.size() != rows_ || v.size() != cols_) fail(Errc::invalid_state, "spectral norm state size mismatch");
  u_ = std::move(u);
  v_ = std::move(v);
  sigma_ = sigma;
}

double top_singular_value(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

// ---------------------------------------------------------------------------

Adam::Adam(std::vector<Var> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.shape(), 0.0);
    v_.emplace_back(p.shape(), 0.0);
  }
}

void Adam::step(const std::vector<Var>& grads) {
  if (grads.size() != params_.size()) fail(Errc::invalid_state, "adam: gradient count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (!grads[k].defined()) continue;
    double* p = params_[k].mutable_value().data();
    const double* g = grads[k].value().data();
    double* m = m_[k].data();
    double* v = v_[k].data();
    for (std::size_t i = 0; i < m_[k].size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      p[i] -= cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
    }
  }
}

Tensor timestep_embedding(const std::vector<int>& t, int dim) {
  const int half = dim / 2;
  Tensor out({static_cast<int>(t.size()), dim});
  for (std::size_t n = 0; n < t.size(); ++n)
    for (int k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(10000.0) * k / std::max(1, half));
      out[n * dim + k] = std::sin(t[n] * freq);
      out[n * dim + half + k] = std::cos(t[n] * freq);
    }
  return out;
}

}  // namespace tldg::nn
