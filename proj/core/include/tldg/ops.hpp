// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "tldg/autograd.hpp"

namespace tldg::ag {

// Elementwise. Binary ops require identical shapes; use the explicit
// broadcast ops below otherwise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var add_const(const Var& a, const Tensor& c);
Var mul_const(const Var& a, Tensor m);
Var square(const Var& a);
Var sqrt(const Var& a);
// sqrt whose derivative is taken as 0 at 0; the derivative factor is not
// itself differentiated, so use it only as the last nonlinearity on a path.
Var safe_sqrt(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var reciprocal(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);  // log(1 + e^x), numerically stable
Var leaky_relu(const Var& a, double slope);
Var pow_scalar(const Var& a, double p);  // requires a >= 0 unless p is an integer
Var silu(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }
inline Var operator-(const Var& a) { return neg(a); }

// Reductions and their adjoint broadcasts.
Var sum(const Var& a);  // -> [1]
Var mean(const Var& a);
Var broadcast_scalar(const Var& s, const Shape& shape);
Var channel_sum(const Var& a);  // [N, C, ...] -> [C]
Var channel_broadcast(const Var& b, const Shape& shape);
Var sample_sum(const Var& a);  // [N, ...] -> [N]
Var sample_broadcast(const Var& s, const Shape& shape);
Var spatial_sum(const Var& a);  // [N, C, H, W] -> [N, C]
Var spatial_broadcast(const Var& a, int h, int w);
Var axis_sum(const Var& a, int axis);  // removes `axis`
Var axis_broadcast(const Var& a, int axis, int n);  // inserts `axis` of length n
// out[c] = a[idx[c], c] for a of shape [R, C], and its adjoint.
Var gather_rows(const Var& a, const std::vector<int>& idx);
Var scatter_rows(const Var& a, const std::vector<int>& idx, int rows);

// Shape manipulation.
Var reshape(const Var& a, const Shape& shape);
Var concat(const std::vector<Var>& parts, int axis);
Var slice(const Var& a, int axis, int start, int length);
Var embed(const Var& a, int axis, int start, int full_length);  // zero-padded adjoint of slice
Var transpose(const Var& a);                                     // 2-D only
Var matmul(const Var& a, const Var& b);                          // [M, K] x [K, N]

struct ConvGeom {
  int kh = 3;
  int kw = 3;
  int stride = 1;
  int pad = 0;

  int out_h(int in_h) const { return (in_h + 2 * pad - kh) / stride + 1; }
  int out_w(int in_w) const { return (in_w + 2 * pad - kw) / stride + 1; }
  int transposed_h(int in_h) const { return (in_h - 1) * stride - 2 * pad + kh; }
  int transposed_w(int in_w) const { return (in_w - 1) * stride - 2 * pad + kw; }
};

// x [N, C, H, W], w [O, C, kh, kw] -> [N, O, Ho, Wo]. No bias.
Var conv2d(const Var& x, const Var& w, const ConvGeom& g);
// y [N, O, Ho, Wo], w [O, C, kh, kw] -> [N, C, out_h, out_w]; adjoint of conv2d in x.
Var conv_transpose2d(const Var& y, const Var& w, const ConvGeom& g, int out_h, int out_w);
// x [N, C, H, W], y [N, O, Ho, Wo] -> [O, C, kh, kw]; adjoint of conv2d in w.
Var conv2d_weight_grad(const Var& x, const Var& y, const ConvGeom& g);

}  // namespace tldg::ag
