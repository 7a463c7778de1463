// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/ops.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "tldg/error.hpp"

namespace tldg::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    fail(Errc::invalid_input, std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                  shape_str(b.shape()));
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  const double* p = a.data();
  double* q = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) q[i] = f(p[i]);
  return out;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  const double* p = a.data();
  const double* r = b.data();
  double* q = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) q[i] = f(p[i], r[i]);
  return out;
}

struct AxisSplit {
  std::size_t outer, mid, inner;
};

AxisSplit split_at(const Shape& s, int axis) {
  if (axis < 0 || axis >= static_cast<int>(s.size()))
    fail(Errc::invalid_input, "axis out of range for shape " + shape_str(s));
  AxisSplit a{1, static_cast<std::size_t>(s[static_cast<std::size_t>(axis)]), 1};
  for (int i = 0; i < axis; ++i) a.outer *= static_cast<std::size_t>(s[static_cast<std::size_t>(i)]);
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i)
    a.inner *= static_cast<std::size_t>(s[i]);
  return a;
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

Var add(const Var& a, const Var& b) {
  same_shape(a, b, "add");
  return make_op(zip(a.value(), b.value(), [](double x, double y) { return x + y; }), {a, b},
                 [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
  same_shape(a, b, "sub");
  return make_op(zip(a.value(), b.value(), [](double x, double y) { return x - y; }), {a, b},
                 [](const Var& g, const std::vector<bool>& need) {
                   return std::vector<Var>{g, need[1] ? neg(g) : Var()};
                 });
}

Var mul(const Var& a, const Var& b) {
  same_shape(a, b, "mul");
  return make_op(zip(a.value(), b.value(), [](double x, double y) { return x * y; }), {a, b},
                 [a, b](const Var& g, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? mul(g, b) : Var(), need[1] ? mul(g, a) : Var()};
                 });
}

Var neg(const Var& a) {
  return make_op(map(a.value(), [](double x) { return -x; }), {a},
                 [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{neg(g)}; });
}

Var scale(const Var& a, double c) {
  return make_op(map(a.value(), [c](double x) { return c * x; }), {a},
                 [c](const Var& g, const std::vector<bool>&) { return std::vector<Var>{scale(g, c)}; });
}

Var add_scalar(const Var& a, double c) {
  return make_op(map(a.value(), [c](double x) { return x + c; }), {a},
                 [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{g}; });
}

Var add_const(const Var& a, const Tensor& c) {
  if (a.shape() != c.shape()) fail(Errc::invalid_input, "add_const: shape mismatch");
  return make_op(zip(a.value(), c, [](double x, double y) { return x + y; }), {a},
                 [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{g}; });
}

Var mul_const(const Var& a, Tensor m) {
  if (a.shape() != m.shape()) fail(Errc::invalid_input, "mul_const: shape mismatch");
  Tensor out = zip(a.value(), m, [](double x, double y) { return x * y; });
  return make_op(std::move(out), {a}, [m = std::move(m)](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{mul_const(g, m)};
  });
}

Var square(const Var& a) {
  return make_op(map(a.value(), [](double x) { return x * x; }), {a},
                 [a](const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{mul(g, scale(a, 2.0))};
                 });
}

Var sqrt(const Var& a) {
  return make_op(map(a.value(), [](double x) { return std::sqrt(x); }), {a},
                 [a](const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{mul(g, scale(reciprocal(sqrt(a)), 0.5))};
                 });
}

Var safe_sqrt(const Var& a) {
  Tensor half_inv = map(a.value(), [](double x) { return x > 0.0 ? 0.5 / std::sqrt(x) : 0.0; });
  Tensor out = map(a.value(), [](double x) { return std::sqrt(std::max(x, 0.0)); });
  return make_op(std::move(out), {a}, [half_inv = std::move(half_inv)](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{mul_const(g, half_inv)};
  });
}

Var exp(const Var& a) {
  return make_op(map(a.value(), [](double x) { return std::exp(x); }), {a},
                 [a](const Var& g, const std::vector<bool>&) { return std::vector<Var>{mul(g, exp(a))}; });
}

Var log(const Var& a) {
  return make_op(map(a.value(), [](double x) { return std::log(x); }), {a},
                 [a](const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{mul(g, reciprocal(a))};
                 });
}

Var reciprocal(const Var& a) {
  return make_op(map(a.value(), [](double x) { return 1.0 / x; }), {a},
                 [a](const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{neg(mul(g, square(reciprocal(a))))};
                 });
}

namespace {
double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Var sigmoid(const Var& a) {
  return make_op(map(a.value(), stable_sigmoid), {a}, [a](const Var& g, const std::vector<bool>&) {
    Var s = sigmoid(a);
    return std::vector<Var>{mul(g, mul(s, add_scalar(neg(s), 1.0)))};
  });
}

Var softplus(const Var& a) {
  return make_op(map(a.value(),
                     [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }),
                 {a},
                 [a](const Var& g, const std::vector<bool>&) { return std::vector<Var>{mul(g, sigmoid(a))}; });
}

Var leaky_relu(const Var& a, double slope) {
  Tensor mask = map(a.value(), [slope](double x) { return x > 0.0 ? 1.0 : slope; });
  Tensor out = zip(a.value(), mask, [](double x, double m) { return x * m; });
  return make_op(std::move(out), {a}, [mask = std::move(mask)](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{mul_const(g, mask)};
  });
}

Var pow_scalar(const Var& a, double p) {
  return make_op(map(a.value(), [p](double x) { return std::pow(x, p); }), {a},
                 [a, p](const Var& g, const std::vector<bool>&) {
                   if (p == 1.0) return std::vector<Var>{g};
                   return std::vector<Var>{mul(g, scale(pow_scalar(a, p - 1.0), p))};
                 });
}

Var silu(const Var& a) { return mul(a, sigmoid(a)); }

// ---------------------------------------------------------------------------
// Reductions

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().vec()) s += v;
  Shape shape = a.shape();
  return make_op(Tensor::scalar(s), {a}, [shape](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{broadcast_scalar(g, shape)};
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Var broadcast_scalar(const Var& s, const Shape& shape) {
  if (s.size() != 1) fail(Errc::invalid_input, "broadcast_scalar expects a single element");
  return make_op(Tensor(shape, s.item()), {s},
                 [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{sum(g)}; });
}

Var channel_sum(const Var& a) {
  if (a.value().rank() < 2) fail(Errc::invalid_input, "channel_sum needs rank >= 2");
  AxisSplit s = split_at(a.shape(), 1);
  Tensor out({static_cast<int>(s.mid)}, 0.0);
  const double* p = a.value().data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t c = 0; c < s.mid; ++c) {
      double acc = 0.0;
      const double* q = p + (o * s.mid + c) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) acc += q[i];
      out[c] += acc;
    }
  Shape shape = a.shape();
  return make_op(std::move(out), {a}, [shape](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{channel_broadcast(g, shape)};
  });
}

Var channel_broadcast(const Var& b, const Shape& shape) {
  AxisSplit s = split_at(shape, 1);
  if (b.size() != s.mid) fail(Errc::invalid_input, "channel_broadcast: channel count mismatch");
  Tensor out(shape);
  double* q = out.data();
  const double* p = b.value().data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t c = 0; c < s.mid; ++c)
      std::fill_n(q + (o * s.mid + c) * s.inner, s.inner, p[c]);
  return make_op(std::move(out), {b},
                 [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{channel_sum(g)}; });
}

Var sample_sum(const Var& a) {
  AxisSplit s = split_at(a.shape(), 0);
  Tensor out({static_cast<int>(s.mid)}, 0.0);
  const double* p = a.value().data();
  for (std::size_t n = 0; n < s.mid; ++n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.inner; ++i) acc += p[n * s.inner + i];
    out[n] = acc;
  }
  Shape shape = a.shape();
  return make_op(std::move(out), {a}, [shape](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{sample_broadcast(g, shape)};
  });
}

Var sample_broadcast(const Var& v, const Shape& shape) {
  AxisSplit s = split_at(shape, 0);
  if (v.size() != s.mid) fail(Errc::invalid_input, "sample_broadcast: batch size mismatch");
  Tensor out(shape);
  for (std::size_t n = 0; n < s.mid; ++n) std::fill_n(out.data() + n * s.inner, s.inner, v.value()[n]);
  return make_op(std::move(out), {v},
                 [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{sample_sum(g)}; });
}

Var spatial_sum(const Var& a) {
  if (a.value().rank() != 4) fail(Errc::invalid_input, "spatial_sum expects NCHW");
  const int n = a.value().dim(0), c = a.value().dim(1), h = a.value().dim(2), w = a.value().dim(3);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor out({n, c}, 0.0);
  const double* p = a.value().data();
  for (std::size_t i = 0; i < static_cast<std::size_t>(n) * c; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < hw; ++k) acc += p[i * hw + k];
    out[i] = acc;
  }
  return make_op(std::move(out), {a}, [h, w](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{spatial_broadcast(g, h, w)};
  });
}

Var spatial_broadcast(const Var& a, int h, int w) {
  if (a.value().rank() != 2) fail(Errc::invalid_input, "spatial_broadcast expects [N, C]");
  const int n = a.value().dim(0), c = a.value().dim(1);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor out({n, c, h, w});
  for (std::size_t i = 0; i < static_cast<std::size_t>(n) * c; ++i)
    std::fill_n(out.data() + i * hw, hw, a.value()[i]);
  return make_op(std::move(out), {a},
                 [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{spatial_sum(g)}; });
}

Var axis_sum(const Var& a, int axis) {
  AxisSplit s = split_at(a.shape(), axis);
  Shape shape = a.shape();
  shape.erase(shape.begin() + axis);
  if (shape.empty()) shape = {1};
  Tensor out(shape, 0.0);
  const double* p = a.value().data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t m = 0; m < s.mid; ++m) {
      const double* q = p + (o * s.mid + m) * s.inner;
      double* r = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) r[i] += q[i];
    }
  const int n = static_cast<int>(s.mid);
  return make_op(std::move(out), {a}, [axis, n](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{axis_broadcast(g, axis, n)};
  });
}

Var axis_broadcast(const Var& a, int axis, int n) {
  Shape shape = a.shape();
  if (axis < 0 || axis > static_cast<int>(shape.size())) fail(Errc::invalid_input, "axis_broadcast: bad axis");
  if (shape.size() == 1 && shape[0] == 1 && axis == 0) shape.clear();
  shape.insert(shape.begin() + axis, n);
  AxisSplit s = split_at(shape, axis);
  Tensor out(shape);
  const double* p = a.value().data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t m = 0; m < s.mid; ++m)
      std::copy_n(p + o * s.inner, s.inner, out.data() + (o * s.mid + m) * s.inner);
  return make_op(std::move(out), {a}, [axis](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{axis_sum(g, axis)};
  });
}

Var gather_rows(const Var& a, const std::vector<int>& idx) {
  if (a.value().rank() != 2) fail(Errc::invalid_input, "gather_rows expects a 2-D tensor");
  const int rows = a.value().dim(0), cols = a.value().dim(1);
  if (static_cast<int>(idx.size()) != cols) fail(Errc::invalid_input, "gather_rows: index length mismatch");
  Tensor out({cols});
  for (int c = 0; c < cols; ++c) out[static_cast<std::size_t>(c)] = a.value()[static_cast<std::size_t>(idx[c]) * cols + c];
  return make_op(std::move(out), {a}, [idx, rows](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{scatter_rows(g, idx, rows)};
  });
}

Var scatter_rows(const Var& a, const std::vector<int>& idx, int rows) {
  const int cols = static_cast<int>(idx.size());
  if (static_cast<int>(a.size()) != cols) fail(Errc::invalid_input, "scatter_rows: length mismatch");
  Tensor out({rows, cols}, 0.0);
  for (int c = 0; c < cols; ++c) out[static_cast<std::size_t>(idx[c]) * cols + c] = a.value()[static_cast<std::size_t>(c)];
  return make_op(std::move(out), {a}, [idx](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{gather_rows(g, idx)};
  });
}

// ---------------------------------------------------------------------------
// Shapes

Var reshape(const Var& a, const Shape& shape) {
  Shape orig = a.shape();
  return make_op(a.value().reshaped(shape), {a}, [orig](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{reshape(g, orig)};
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) fail(Errc::invalid_input, "concat of nothing");
  Shape shape = parts.front().shape();
  int total = 0;
  std::vector<int> sizes;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size()) fail(Errc::invalid_input, "concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (static_cast<int>(i) != axis && s[i] != shape[i]) fail(Errc::invalid_input, "concat: shape mismatch");
    sizes.push_back(s[static_cast<std::size_t>(axis)]);
    total += sizes.back();
  }
  shape[static_cast<std::size_t>(axis)] = total;
  AxisSplit s = split_at(shape, axis);
  Tensor out(shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t m = static_cast<std::size_t>(sizes[k]);
    const double* p = parts[k].value().data();
    for (std::size_t o = 0; o < s.outer; ++o)
      std::copy_n(p + o * m * s.inner, m * s.inner, out.data() + (o * s.mid + offset) * s.inner);
    offset += m;
  }
  return make_op(std::move(out), parts, [sizes, axis](const Var& g, const std::vector<bool>& need) {
    std::vector<Var> grads(sizes.size());
    int start = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (need[k]) grads[k] = slice(g, axis, start, sizes[k]);
      start += sizes[k];
    }
    return grads;
  });
}

Var slice(const Var& a, int axis, int start, int length) {
  Shape shape = a.shape();
  const int full = shape.at(static_cast<std::size_t>(axis));
  if (start < 0 || length < 0 || start + length > full) fail(Errc::invalid_input, "slice out of range");
  AxisSplit s = split_at(shape, axis);
  shape[static_cast<std::size_t>(axis)] = length;
  Tensor out(shape);
  const double* p = a.value().data();
  const std::size_t len = static_cast<std::size_t>(length);
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(p + (o * s.mid + static_cast<std::size_t>(start)) * s.inner, len * s.inner,
                out.data() + o * len * s.inner);
  return make_op(std::move(out), {a}, [axis, start, full](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{embed(g, axis, start, full)};
  });
}

Var embed(const Var& a, int axis, int start, int full_length) {
  Shape shape = a.shape();
  const int length = shape.at(static_cast<std::size_t>(axis));
  if (start < 0 || start + length > full_length) fail(Errc::invalid_input, "embed out of range");
  shape[static_cast<std::size_t>(axis)] = full_length;
  AxisSplit s = split_at(shape, axis);
  Tensor out(shape, 0.0);
  const double* p = a.value().data();
  const std::size_t len = static_cast<std::size_t>(length);
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(p + o * len * s.inner, len * s.inner,
                out.data() + (o * s.mid + static_cast<std::size_t>(start)) * s.inner);
  return make_op(std::move(out), {a}, [axis, start, length](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{slice(g, axis, start, length)};
  });
}

Var transpose(const Var& a) {
  if (a.value().rank() != 2) fail(Errc::invalid_input, "transpose expects a 2-D tensor");
  const int r = a.value().dim(0), c = a.value().dim(1);
  Tensor out({c, r});
  RowMap(out.data(), c, r) = ConstRowMap(a.value().data(), r, c).transpose();
  return make_op(std::move(out), {a},
                 [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{transpose(g)}; });
}

Var matmul(const Var& a, const Var& b) {
  if (a.value().rank() != 2 || b.value().rank() != 2 || a.value().dim(1) != b.value().dim(0))
    fail(Errc::invalid_input, "matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                  shape_str(b.shape()));
  const int m = a.value().dim(0), k = a.value().dim(1), n = b.value().dim(1);
  Tensor out({m, n});
  RowMap(out.data(), m, n).noalias() = ConstRowMap(a.value().data(), m, k) * ConstRowMap(b.value().data(), k, n);
  return make_op(std::move(out), {a, b}, [a, b](const Var& g, const std::vector<bool>& need) {
    return std::vector<Var>{need[0] ? matmul(g, transpose(b)) : Var(),
                            need[1] ? matmul(transpose(a), g) : Var()};
  });
}

// ---------------------------------------------------------------------------
// Convolution family. With T(x, w, y) = <conv2d(x, w), y>, conv2d, the
// transposed convolution and the weight gradient are the three partial
// derivatives of T, so each one's backward pass is built from the others.

namespace {

void im2col(const double* x, int c, int h, int w, const ConvGeom& g, int ho, int wo, double* cols) {
  const std::size_t hw = static_cast<std::size_t>(ho) * wo;
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < g.kh; ++i)
      for (int j = 0; j < g.kw; ++j) {
        double* row = cols + (static_cast<std::size_t>((ch * g.kh + i) * g.kw + j)) * hw;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * g.stride + i - g.pad;
          double* dst = row + static_cast<std::size_t>(oh) * wo;
          if (ih < 0 || ih >= h) {
            std::fill_n(dst, wo, 0.0);
            continue;
          }
          const double* src = x + (static_cast<std::size_t>(ch) * h + ih) * w;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * g.stride + j - g.pad;
            dst[ow] = (iw >= 0 && iw < w) ? src[iw] : 0.0;
          }
        }
      }
}

void col2im(const double* cols, int c, int h, int w, const ConvGeom& g, int ho, int wo, double* x) {
  const std::size_t hw = static_cast<std::size_t>(ho) * wo;
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < g.kh; ++i)
      for (int j = 0; j < g.kw; ++j) {
        const double* row = cols + (static_cast<std::size_t>((ch * g.kh + i) * g.kw + j)) * hw;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * g.stride + i - g.pad;
          if (ih < 0 || ih >= h) continue;
          const double* src = row + static_cast<std::size_t>(oh) * wo;
          double* dst = x + (static_cast<std::size_t>(ch) * h + ih) * w;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * g.stride + j - g.pad;
            if (iw >= 0 && iw < w) dst[iw] += src[ow];
          }
        }
      }
}

void check4(const Var& v, const char* what) {
  if (v.value().rank() != 4) fail(Errc::invalid_input, std::string(what) + " expects a 4-D tensor");
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const ConvGeom& g) {
  check4(x, "conv2d");
  check4(w, "conv2d weight");
  const int n = x.value().dim(0), c = x.value().dim(1), h = x.value().dim(2), wd = x.value().dim(3);
  const int o = w.value().dim(0);
  if (w.value().dim(1) != c || w.value().dim(2) != g.kh || w.value().dim(3) != g.kw)
    fail(Errc::invalid_input, "conv2d: weight " + shape_str(w.shape()) + " does not fit input " +
                                  shape_str(x.shape()));
  const int ho = g.out_h(h), wo = g.out_w(wd);
  if (ho <= 0 || wo <= 0) fail(Errc::invalid_input, "conv2d: empty output");
  const int ckk = c * g.kh * g.kw;
  const std::size_t hw = static_cast<std::size_t>(ho) * wo;
  Tensor out({n, o, ho, wo});
  std::vector<double> cols(static_cast<std::size_t>(ckk) * hw);
  ConstRowMap wm(w.value().data(), o, ckk);
  for (int s = 0; s < n; ++s) {
    im2col(x.value().data() + static_cast<std::size_t>(s) * c * h * wd, c, h, wd, g, ho, wo, cols.data());
    RowMap(out.data() + static_cast<std::size_t>(s) * o * hw, o, static_cast<Eigen::Index>(hw)).noalias() =
        wm * ConstRowMap(cols.data(), ckk, static_cast<Eigen::Index>(hw));
  }
  return make_op(std::move(out), {x, w}, [x, w, g, h, wd](const Var& gy, const std::vector<bool>& need) {
    return std::vector<Var>{need[0] ? conv_transpose2d(gy, w, g, h, wd) : Var(),
                            need[1] ? conv2d_weight_grad(x, gy, g) : Var()};
  });
}

Var conv_transpose2d(const Var& y, const Var& w, const ConvGeom& g, int out_h, int out_w) {
  check4(y, "conv_transpose2d");
  check4(w, "conv_transpose2d weight");
  const int n = y.value().dim(0), o = y.value().dim(1), ho = y.value().dim(2), wo = y.value().dim(3);
  const int c = w.value().dim(1);
  if (w.value().dim(0) != o || w.value().dim(2) != g.kh || w.value().dim(3) != g.kw)
    fail(Errc::invalid_input, "conv_transpose2d: weight " + shape_str(w.shape()) + " does not fit input " +
                                  shape_str(y.shape()));
  if (g.out_h(out_h) != ho || g.out_w(out_w) != wo)
    fail(Errc::invalid_input, "conv_transpose2d: output size inconsistent with geometry");
  const int ckk = c * g.kh * g.kw;
  const std::size_t hw = static_cast<std::size_t>(ho) * wo;
  Tensor out({n, c, out_h, out_w}, 0.0);
  RowMat cols(ckk, static_cast<Eigen::Index>(hw));
  ConstRowMap wm(w.value().data(), o, ckk);
  for (int s = 0; s < n; ++s) {
    cols.noalias() = wm.transpose() * ConstRowMap(y.value().data() + static_cast<std::size_t>(s) * o * hw, o,
                                                  static_cast<Eigen::Index>(hw));
    col2im(cols.data(), c, out_h, out_w, g, ho, wo,
           out.data() + static_cast<std::size_t>(s) * c * out_h * out_w);
  }
  return make_op(std::move(out), {y, w}, [y, w, g](const Var& gx, const std::vector<bool>& need) {
    return std::vector<Var>{need[0] ? conv2d(gx, w, g) : Var(),
                            need[1] ? conv2d_weight_grad(gx, y, g) : Var()};
  });
}

Var conv2d_weight_grad(const Var& x, const Var& y, const ConvGeom& g) {
  check4(x, "conv2d_weight_grad");
  check4(y, "conv2d_weight_grad");
  const int n = x.value().dim(0), c = x.value().dim(1), h = x.value().dim(2), wd = x.value().dim(3);
  const int o = y.value().dim(1), ho = y.value().dim(2), wo = y.value().dim(3);
  if (y.value().dim(0) != n || g.out_h(h) != ho || g.out_w(wd) != wo)
    fail(Errc::invalid_input, "conv2d_weight_grad: inconsistent shapes");
  const int ckk = c * g.kh * g.kw;
  const std::size_t hw = static_cast<std::size_t>(ho) * wo;
  Tensor out({o, c, g.kh, g.kw}, 0.0);
  RowMap gw(out.data(), o, ckk);
  std::vector<double> cols(static_cast<std::size_t>(ckk) * hw);
  for (int s = 0; s < n; ++s) {
    im2col(x.value().data() + static_cast<std::size_t>(s) * c * h * wd, c, h, wd, g, ho, wo, cols.data());
    gw.noalias() += ConstRowMap(y.value().data() + static_cast<std::size_t>(s) * o * hw, o,
                                static_cast<Eigen::Index>(hw)) *
                    ConstRowMap(cols.data(), ckk, static_cast<Eigen::Index>(hw)).transpose();
  }
  return make_op(std::move(out), {x, y}, [x, y, g, h, wd](const Var& gk, const std::vector<bool>& need) {
    return std::vector<Var>{need[0] ? conv_transpose2d(y, gk, g, h, wd) : Var(),
                            need[1] ? conv2d(x, gk, g) : Var()};
  });
}

}  // namespace tldg::ag
