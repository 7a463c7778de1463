// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

// Central finite differences against reverse-mode gradients.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tldg/autograd.hpp"
#include "tldg/ops.hpp"

namespace tldg::testing {

// f maps the inputs to a scalar Var. Returns the worst relative error
// |g_ad - g_fd| / max(floor, |g_fd|) over every input coordinate.
inline double gradcheck(const std::function<ag::Var(const std::vector<ag::Var>&)>& f,
                        std::vector<ag::Var> inputs, double h = 1e-6, double floor = 1e-3) {
  ag::Var out = f(inputs);
  std::vector<ag::Var> g = ag::grad(out, inputs);
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    ag::Tensor& v = inputs[k].mutable_value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + h;
      const double fp = f(inputs).item();
      v[i] = keep - h;
      const double fm = f(inputs).item();
      v[i] = keep;
      const double fd = (fp - fm) / (2.0 * h);
      const double ad = g[k].value()[i];
      worst = std::max(worst, std::abs(ad - fd) / std::max(floor, std::abs(fd)));
    }
  }
  return worst;
}

inline ag::Tensor random_tensor(const ag::Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  ag::Tensor t(shape);
  std::uint64_t s = seed * 6364136223846793005ULL + 1442695040888963407ULL;
  for (double& x : t.vec()) {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    x = lo + (hi - lo) * static_cast<double>(s >> 11) / static_cast<double>(1ULL << 53);
  }
  return t;
}

}  // namespace tldg::testing
