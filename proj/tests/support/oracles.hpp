// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference implementations used as test oracles. They are
// written independently of the library code and favour obviousness over
// speed.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace tldg::oracle {

// Pair counting.
inline double auc(const std::vector<double>& normal, const std::vector<double>& anomaly) {
  double wins = 0.0;
  for (double a : anomaly)
    for (double n : normal) wins += a > n ? 1.0 : (a == n ? 0.5 : 0.0);
  return wins / (static_cast<double>(normal.size()) * static_cast<double>(anomaly.size()));
}

// Threshold sweep: for every candidate threshold (each distinct score, plus
// +inf), the point (FPR, TPR) of "score >= threshold". Points are visited in
// increasing FPR order and joined by straight lines; the area over [0, p] is
// integrated with the last segment clipped at p.
inline double pauc(const std::vector<double>& normal, const std::vector<double>& anomaly, double p) {
  std::set<double> cuts(normal.begin(), normal.end());
  cuts.insert(anomaly.begin(), anomaly.end());
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  for (auto it = cuts.rbegin(); it != cuts.rend(); ++it) {
    double fp = 0, tp = 0;
    for (double n : normal) fp += n >= *it;
    for (double a : anomaly) tp += a >= *it;
    pts.emplace_back(fp / normal.size(), tp / anomaly.size());
  }
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    auto [x0, y0] = pts[i - 1];
    auto [x1, y1] = pts[i];
    if (x0 >= p) break;
    if (x1 > p) {
      y1 = y0 + (y1 - y0) * (p - x0) / (x1 - x0);
      x1 = p;
    }
    area += (x1 - x0) * (y0 + y1) / 2.0;
  }
  return area / p;
}

inline double dist(const Eigen::MatrixXd& x, int i, const Eigen::VectorXd& q) {
  return std::sqrt((x.row(i).transpose() - q).squaredNorm());
}

inline double knn(const Eigen::MatrixXd& train, const Eigen::VectorXd& q, int k) {
  std::vector<double> d;
  for (int i = 0; i < train.rows(); ++i) d.push_back(dist(train, i, q));
  std::sort(d.begin(), d.end());
  double s = 0;
  for (int i = 0; i < k; ++i) s += d[i];
  return s / k;
}

// Neighbour list of a point (index `self` excluded), sorted by (distance, index).
inline std::vector<std::pair<double, int>> neighbours(const Eigen::MatrixXd& train,
                                                      const Eigen::VectorXd& q, int self) {
  std::vector<std::pair<double, int>> d;
  for (int i = 0; i < train.rows(); ++i)
    if (i != self) d.emplace_back(dist(train, i, q), i);
  std::sort(d.begin(), d.end());
  return d;
}

inline double lof(const Eigen::MatrixXd& train, const Eigen::VectorXd& q, int k, double eps = 1e-10) {
  const int n = static_cast<int>(train.rows());
  auto kdist = [&](int o) { return neighbours(train, train.row(o).transpose(), o)[k - 1].first; };
  auto lrd_of = [&](const Eigen::VectorXd& x, int self) {
    const auto nb = neighbours(train, x, self);
    double s = 0;
    for (int j = 0; j < k; ++j) s += std::max(kdist(nb[j].second), nb[j].first);
    return 1.0 / std::max(s / k, eps);
  };
  const auto nb = neighbours(train, q, -1);
  double ratio = 0;
  for (int j = 0; j < k; ++j) ratio += lrd_of(train.row(nb[j].second).transpose(), nb[j].second);
  (void)n;
  return ratio / k / lrd_of(q, -1);
}

// Closed-form negative log-likelihood under the maximum-likelihood diagonal
// Gaussian of `train`.
inline double gaussian_nll(const Eigen::MatrixXd& train, const Eigen::VectorXd& q) {
  const int n = static_cast<int>(train.rows()), d = static_cast<int>(train.cols());
  double nll = 0;
  for (int j = 0; j < d; ++j) {
    double mu = 0;
    for (int i = 0; i < n; ++i) mu += train(i, j);
    mu /= n;
    double var = 0;
    for (int i = 0; i < n; ++i) var += (train(i, j) - mu) * (train(i, j) - mu);
    var /= n;
    nll += 0.5 * std::log(2 * M_PI * var) + 0.5 * (q[j] - mu) * (q[j] - mu) / var;
  }
  return nll;
}

// Stochastic outlier selection. Precision per point by bisection on the
// perplexity 2^H (entropy in bits); the query is appended to the data set
// without re-tuning the training precisions.
inline std::vector<double> sos_betas(const Eigen::MatrixXd& x, double h) {
  const int n = static_cast<int>(x.rows());
  std::vector<double> betas(n);
  for (int j = 0; j < n; ++j) {
    std::vector<double> d2;
    for (int k = 0; k < n; ++k)
      if (k != j) d2.push_back((x.row(j) - x.row(k)).squaredNorm());
    const double m = *std::min_element(d2.begin(), d2.end());
    auto perp = [&](double beta) {
      double z = 0, hb = 0;
      for (double v : d2) z += std::exp(-beta * (v - m));
      for (double v : d2) {
        const double b = std::exp(-beta * (v - m)) / z;
        if (b > 0) hb -= b * std::log2(b);
      }
      return std::pow(2.0, hb);
    };
    double lo = 0, hi = 1;
    while (perp(hi) > h) hi *= 2;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (perp(mid) > h ? lo : hi) = mid;
    }
    betas[j] = 0.5 * (lo + hi);
  }
  return betas;
}

inline double sos(const Eigen::MatrixXd& x, const Eigen::VectorXd& q, double h) {
  const auto betas = sos_betas(x, h);
  const int n = static_cast<int>(x.rows());
  double prob = 1.0;
  for (int j = 0; j < n; ++j) {
    // Affinities of j towards the other training points and the query,
    // shifted by j's nearest squared distance for range safety.
    std::vector<double> d2;
    for (int k = 0; k < n; ++k)
      if (k != j) d2.push_back((x.row(j) - x.row(k)).squaredNorm());
    const double dq = (x.row(j).transpose() - q).squaredNorm();
    const double m = std::min(*std::min_element(d2.begin(), d2.end()), dq);
    double z = 0;
    for (double v : d2) z += std::exp(-betas[j] * (v - m));
    const double aq = std::exp(-betas[j] * (dq - m));
    prob *= 1.0 - aq / (z + aq);
  }
  return prob;
}

}  // namespace tldg::oracle
