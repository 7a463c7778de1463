// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "tldg/error.hpp"
#include "tldg/hash.hpp"

namespace tldg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Eigen::VectorXd sq_dists(const Eigen::MatrixXd& rows, const Eigen::VectorXd& x) {
  return (rows.rowwise() - x.transpose()).rowwise().squaredNorm();
}

// Indices of the k smallest entries, nearest first, ties by index.
std::vector<int> k_smallest(const Eigen::VectorXd& d, int k, int skip = -1) {
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(d.size()));
  for (int i = 0; i < d.size(); ++i)
    if (i != skip) idx.push_back(i);
  auto cmp = [&](int a, int b) { return d[a] < d[b] || (d[a] == d[b] && a < b); };
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), cmp);
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

void check_query(const Eigen::MatrixXd& train, const Eigen::VectorXd& x) {
  if (x.size() != train.cols())
    fail(Errc::invalid_input, "query dimension " + std::to_string(x.size()) + " does not match " +
                                  std::to_string(train.cols()));
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

double log_sigmoid(double r) {
  return r >= 0 ? -std::log1p(std::exp(-r)) : r - std::log1p(std::exp(r));
}

}  // namespace

std::string_view to_string(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::recon: return "recon";
    case ScorerKind::knn: return "knn";
    case ScorerKind::lof: return "lof";
    case ScorerKind::gmm: return "gmm";
    case ScorerKind::sos: return "sos";
  }
  return "?";
}

ScorerKind parse_scorer_kind(std::string_view s) {
  for (auto k : kScorerKinds)
    if (to_string(k) == s) return k;
  fail(Errc::invalid_input, "unknown scorer kind '" + std::string(s) + "'");
}

double recon_score(const Eigen::VectorXd& z_real, const Eigen::VectorXd& z_rec) {
  if (z_real.size() != z_rec.size()) fail(Errc::invalid_input, "recon_score dimension mismatch");
  return (z_real - z_rec).squaredNorm();
}

// ---------------------------------------------------------------------------

KnnScorer::KnnScorer(Eigen::MatrixXd train, int k) : train_(std::move(train)), k_(k) {
  if (k < 1) fail(Errc::invalid_config, "knn k must be >= 1");
  if (k > train_.rows())
    fail(Errc::invalid_config, "knn k=" + std::to_string(k) + " exceeds the train size " +
                                   std::to_string(train_.rows()));
}

double KnnScorer::score(const Eigen::VectorXd& x) const {
  check_query(train_, x);
  const Eigen::VectorXd d2 = sq_dists(train_, x);
  double s = 0.0;
  for (int i : k_smallest(d2, k_)) s += std::sqrt(d2[i]);
  return s / k_;
}

// ---------------------------------------------------------------------------

LofScorer::LofScorer(Eigen::MatrixXd train, int k, double eps)
    : train_(std::move(train)), k_(k), eps_(eps) {
  const auto n = static_cast<int>(train_.rows());
  if (k < 2) fail(Errc::invalid_config, "lof k must be >= 2");
  if (n < k + 1)
    fail(Errc::invalid_config, "lof k=" + std::to_string(k) + " needs at least " +
                                   std::to_string(k + 1) + " train points");
  if (!(eps > 0.0)) fail(Errc::invalid_config, "lof eps must be positive");
  std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(n));
  std::vector<Eigen::VectorXd> dist(static_cast<std::size_t>(n));
  k_distance_.resize(n);
  for (int i = 0; i < n; ++i) {
    dist[i] = sq_dists(train_, train_.row(i).transpose()).cwiseSqrt();
    nbrs[i] = k_smallest(dist[i], k, i);
    k_distance_[i] = dist[i][nbrs[i].back()];
  }
  lrd_.resize(n);
  for (int i = 0; i < n; ++i) {
    double reach = 0.0;
    for (int o : nbrs[i]) reach += std::max(k_distance_[o], dist[i][o]);
    lrd_[i] = 1.0 / std::max(reach / k, eps_);
  }
}

double LofScorer::score(const Eigen::VectorXd& x) const {
  check_query(train_, x);
  const Eigen::VectorXd d = sq_dists(train_, x).cwiseSqrt();
  double reach = 0.0, lrd_sum = 0.0;
  for (int o : k_smallest(d, k_)) {
    reach += std::max(k_distance_[o], d[o]);
    lrd_sum += lrd_[o];
  }
  const double lrd_q = 1.0 / std::max(reach / k_, eps_);
  return (lrd_sum / k_) / lrd_q;
}

// ---------------------------------------------------------------------------

GmmScorer::GmmScorer(Eigen::VectorXd weights, Eigen::MatrixXd means, Eigen::MatrixXd variances)
    : weights_(std::move(weights)), means_(std::move(means)), variances_(std::move(variances)) {
  if (weights_.size() != means_.rows() || means_.rows() != variances_.rows() ||
      means_.cols() != variances_.cols() || weights_.size() == 0)
    fail(Errc::invalid_input, "inconsistent GMM parameter shapes");
  if ((variances_.array() <= 0.0).any()) fail(Errc::invalid_input, "GMM variances must be positive");
}

GmmScorer::GmmScorer(const Eigen::MatrixXd& x, const GmmConfig& cfg) {
  const auto n = static_cast<int>(x.rows());
  const auto d = static_cast<int>(x.cols());
  const int m = cfg.components;
  if (m < 1) fail(Errc::invalid_config, "gmm needs at least one component");
  if (n < std::max(m, 2))
    fail(Errc::invalid_config, "gmm with " + std::to_string(m) + " components needs at least " +
                                   std::to_string(std::max(m, 2)) + " train points");
  if (cfg.max_iter < 1 || !(cfg.var_floor > 0.0)) fail(Errc::invalid_config, "bad gmm config");

  // k-means++ seeding.
  std::mt19937_64 rng(cfg.seed);
  Eigen::MatrixXd centers(m, d);
  centers.row(0) = x.row(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n)));
  Eigen::VectorXd best = sq_dists(x, centers.row(0).transpose());
  for (int c = 1; c < m; ++c) {
    const double total = best.sum();
    int pick = 0;
    if (total > 0.0) {
      const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += best[i];
        if (acc > u) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    }
    centers.row(c) = x.row(pick);
    best = best.cwiseMin(sq_dists(x, centers.row(c).transpose()));
  }
  // Lloyd refinement.
  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < cfg.kmeans_iter; ++it) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      Eigen::Index c;
      (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&c);
      if (static_cast<int>(c) != assign[i]) changed = true;
      assign[i] = static_cast<int>(c);
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(m, d);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < n; ++i) {
      sums.row(assign[i]) += x.row(i);
      counts[assign[i]] += 1.0;
    }
    for (int c = 0; c < m; ++c)
      if (counts[c] > 0) centers.row(c) = sums.row(c) / counts[c];
    if (it > 0 && !changed) break;
  }

  const Eigen::RowVectorXd global_mean = x.colwise().mean();
  const Eigen::RowVectorXd global_var =
      (x.rowwise() - global_mean).array().square().colwise().mean().max(cfg.var_floor);
  weights_ = Eigen::VectorXd::Zero(m);
  means_ = centers;
  variances_ = Eigen::MatrixXd::Zero(m, d);
  for (int i = 0; i < n; ++i) {
    weights_[assign[i]] += 1.0;
    variances_.row(assign[i]) += (x.row(i) - centers.row(assign[i])).array().square().matrix();
  }
  for (int c = 0; c < m; ++c) {
    if (weights_[c] > 0)
      variances_.row(c) = (variances_.row(c) / weights_[c]).array().max(cfg.var_floor).matrix();
    else
      variances_.row(c) = global_var;
  }
  weights_ /= n;
  weights_ = weights_.array().max(1e-12).matrix();
  weights_ /= weights_.sum();

  // EM.
  Eigen::MatrixXd resp(n, m);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_iter; ++it) {
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd lj = log_joint(x.row(i).transpose());
      const double lse = log_sum_exp(lj);
      ll += lse;
      resp.row(i) = (lj.array() - lse).exp().transpose();
    }
    ll /= n;
    if (!std::isfinite(ll)) fail(Errc::numeric_failure, "gmm log-likelihood is not finite");
    mean_ll_ = ll;
    iterations_ = it;
    if (std::abs(ll - prev_ll) < cfg.tol) break;
    prev_ll = ll;
    floored_ = 0;
    for (int c = 0; c < m; ++c) {
      const double nk = resp.col(c).sum();
      if (nk < 1e-10) {
        weights_[c] = 1e-12;
        continue;
      }
      const Eigen::RowVectorXd mu = (resp.col(c).transpose() * x) / nk;
      Eigen::RowVectorXd var =
          (resp.col(c).transpose() * (x.rowwise() - mu).array().square().matrix()) / nk;
      for (int j = 0; j < d; ++j)
        if (var[j] < cfg.var_floor) {
          var[j] = cfg.var_floor;
          ++floored_;
        }
      means_.row(c) = mu;
      variances_.row(c) = var;
      weights_[c] = nk / n;
    }
    weights_ /= weights_.sum();
  }
  if (floored_ > 0)
    spdlog::warn("gmm: {} variance entr{} floored at {}", floored_, floored_ == 1 ? "y" : "ies",
                 cfg.var_floor);
}

Eigen::VectorXd GmmScorer::log_joint(const Eigen::VectorXd& x) const {
  const auto m = weights_.size();
  const auto d = static_cast<double>(means_.cols());
  Eigen::VectorXd out(m);
  for (Eigen::Index c = 0; c < m; ++c) {
    const double maha = ((x.transpose() - means_.row(c)).array().square() / variances_.row(c).array()).sum();
    out[c] = std::log(weights_[c]) - 0.5 * (d * kLog2Pi + variances_.row(c).array().log().sum() + maha);
  }
  return out;
}

double GmmScorer::score(const Eigen::VectorXd& x) const {
  if (x.size() != means_.cols()) fail(Errc::invalid_input, "gmm query dimension mismatch");
  return -log_sum_exp(log_joint(x));
}

// ---------------------------------------------------------------------------

SosScorer::SosScorer(Eigen::MatrixXd train, double perplexity)
    : train_(std::move(train)), perplexity_(perplexity) {
  const auto n = static_cast<int>(train_.rows());
  if (!(perplexity >= 1.0) || perplexity > n - 1)
    fail(Errc::invalid_config, "sos perplexity " + std::to_string(perplexity) +
                                   " must lie in [1, train size - 1] (train size " +
                                   std::to_string(n) + ")");
  const double target = std::log(perplexity);
  betas_.resize(n);
  shift_.resize(n);
  log_sum_.resize(n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd d2 = sq_dists(train_, train_.row(j).transpose());
    d2[j] = std::numeric_limits<double>::infinity();
    const double shift = d2.minCoeff();
    Eigen::VectorXd s = d2.array() - shift;
    s[j] = 0.0;
    // Entropy of the binding distribution at precision beta; decreasing in beta.
    auto eval = [&](double beta, double& log_sum) {
      Eigen::ArrayXd a = (-beta * s.array()).exp();
      a[j] = 0.0;
      const double sum = a.sum();
      log_sum = std::log(sum);
      return log_sum + beta * (a * s.array()).sum() / sum;
    };
    double lo = 0.0, hi = std::numeric_limits<double>::infinity(), beta = 1.0, ls = 0.0;
    for (int it = 0; it < 400; ++it) {
      const double h = eval(beta, ls);
      if (std::abs(h - target) < 1e-13) break;
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (lo + hi);
      } else {
        hi = beta;
        beta = 0.5 * (lo + hi);
      }
      if (!std::isinf(hi) && hi - lo <= 1e-15 * std::max(1.0, hi)) break;
    }
    eval(beta, ls);
    betas_[j] = beta;
    shift_[j] = shift;
    log_sum_[j] = ls;
  }
}

double SosScorer::score(const Eigen::VectorXd& x) const {
  check_query(train_, x);
  const Eigen::VectorXd d2 = sq_dists(train_, x);
  double log_p = 0.0;
  for (Eigen::Index j = 0; j < d2.size(); ++j) {
    // 1 - b_jq = sigmoid(log S_j + beta_j (d2 - shift_j)) in shifted units.
    const double r = log_sum_[j] + betas_[j] * (d2[j] - shift_[j]);
    log_p += log_sigmoid(r);
  }
  return std::exp(log_p);
}

Eigen::VectorXd SosScorer::train_outlier_probability() const {
  const auto n = train_.rows();
  Eigen::VectorXd log_p = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::VectorXd d2 = sq_dists(train_, train_.row(j).transpose());
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == j) continue;
      const double b = std::exp(-betas_[j] * (d2[i] - shift_[j]) - log_sum_[j]);
      log_p[i] += std::log1p(-std::min(b, 1.0));
    }
  }
  return log_p.array().exp();
}

// ---------------------------------------------------------------------------

Standardizer Standardizer::fit(const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0) fail(Errc::invalid_input, "cannot standardize an empty set");
  Standardizer s;
  s.mean = rows.colwise().mean().transpose();
  const Eigen::VectorXd sd =
      (rows.rowwise() - s.mean.transpose()).array().square().colwise().mean().sqrt().transpose();
  s.scale = sd.unaryExpr([](double v) { return v > 1e-12 ? v : 1.0; });
  return s;
}

Eigen::VectorXd Standardizer::apply(const Eigen::VectorXd& v) const {
  if (v.size() != mean.size()) fail(Errc::invalid_input, "standardizer dimension mismatch");
  return (v - mean).cwiseQuotient(scale);
}

Eigen::MatrixXd Standardizer::apply_rows(const Eigen::MatrixXd& rows) const {
  if (rows.cols() != mean.size()) fail(Errc::invalid_input, "standardizer dimension mismatch");
  return (rows.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

JointSpace JointSpace::fit(const Eigen::MatrixXd& mel_rows, const Eigen::MatrixXd& wave_rows) {
  if (mel_rows.rows() != wave_rows.rows())
    fail(Errc::invalid_input, "mel and waveform blocks have different clip counts");
  return {Standardizer::fit(mel_rows), Standardizer::fit(wave_rows)};
}

Eigen::VectorXd JointSpace::join(const Eigen::VectorXd& z_mel, const Eigen::VectorXd& z_wave) const {
  Eigen::VectorXd out(d_mel() + d_wave());
  out << mel.apply(z_mel), wave.apply(z_wave);
  return out;
}

Eigen::MatrixXd JointSpace::join_rows(const Eigen::MatrixXd& mel_rows,
                                      const Eigen::MatrixXd& wave_rows) const {
  if (mel_rows.rows() != wave_rows.rows())
    fail(Errc::invalid_input, "mel and waveform blocks have different clip counts");
  Eigen::MatrixXd out(mel_rows.rows(), d_mel() + d_wave());
  out << mel.apply_rows(mel_rows), wave.apply_rows(wave_rows);
  return out;
}

// ---------------------------------------------------------------------------

bool FittedDetectors::available(ScorerKind kind) const {
  switch (kind) {
    case ScorerKind::recon: return true;
    case ScorerKind::knn: return knn.has_value();
    case ScorerKind::lof: return lof.has_value();
    case ScorerKind::gmm: return gmm.has_value();
    case ScorerKind::sos: return sos.has_value();
  }
  return false;
}

std::vector<ScorerKind> FittedDetectors::available_kinds() const {
  std::vector<ScorerKind> out;
  for (auto k : kScorerKinds)
    if (available(k)) out.push_back(k);
  return out;
}

double FittedDetectors::score(ScorerKind kind, const Eigen::VectorXd& joint, double s_r) const {
  if (!available(kind))
    fail(Errc::invalid_state, std::string("scorer ") + std::string(to_string(kind)) + " is unavailable");
  switch (kind) {
    case ScorerKind::recon: return s_r;
    case ScorerKind::knn: return knn->score(joint);
    case ScorerKind::lof: return lof->score(joint);
    case ScorerKind::gmm: return gmm->score(joint);
    case ScorerKind::sos: return sos->score(joint);
  }
  return 0.0;
}

FittedDetectors fit_detectors(const JointSpace& space, const Eigen::MatrixXd& train_joint,
                              const DetectConfig& cfg, std::uint64_t seed) {
  FittedDetectors f;
  f.space = space;
  f.train = train_joint;
  const auto n = static_cast<int>(train_joint.rows());
  const std::string size = " (train size " + std::to_string(n) + ")";
  if (cfg.knn_k >= 1 && n >= cfg.knn_k)
    f.knn.emplace(train_joint, cfg.knn_k);
  else
    f.unavailable[ScorerKind::knn] = "needs at least k=" + std::to_string(cfg.knn_k) + " points" + size;
  if (cfg.lof_k >= 2 && n >= cfg.lof_k + 1)
    f.lof.emplace(train_joint, cfg.lof_k, cfg.lof_eps);
  else
    f.unavailable[ScorerKind::lof] = "needs k >= 2 and k+1=" + std::to_string(cfg.lof_k + 1) + " points" + size;
  if (cfg.gmm.components >= 1 && n >= std::max(cfg.gmm.components, 2)) {
    GmmConfig g = cfg.gmm;
    g.seed = seed;
    f.gmm.emplace(train_joint, g);
  } else {
    f.unavailable[ScorerKind::gmm] =
        "needs at least " + std::to_string(std::max(cfg.gmm.components, 2)) + " points" + size;
  }
  if (cfg.sos_perplexity >= 1.0 && cfg.sos_perplexity <= n - 1)
    f.sos.emplace(train_joint, cfg.sos_perplexity);
  else
    f.unavailable[ScorerKind::sos] = "perplexity must lie in [1, n-1]" + size;
  for (const auto& [kind, why] : f.unavailable)
    spdlog::warn("scorer {} unavailable: {}", to_string(kind), why);
  return f;
}

std::map<std::string, FittedDetectors> fit_all(const std::map<std::string, TrainEmbeddings>& train,
                                               const DetectConfig& cfg) {
  std::map<std::string, FittedDetectors> out;
  for (const auto& [machine, emb] : train) {
    if (emb.mel.rows() == 0) fail(Errc::invalid_input, "no train embeddings for " + machine);
    const JointSpace space = JointSpace::fit(emb.mel, emb.wave);
    Fnv1a h;
    h.update(machine);
    h.update_u64(cfg.gmm.seed);
    out.emplace(machine, fit_detectors(space, space.join_rows(emb.mel, emb.wave), cfg, h.digest()));
  }
  return out;
}

// ---------------------------------------------------------------------------

DetectorSelection select(const std::map<std::string, ValidationSet>& validation, double p) {
  DetectorSelection sel;
  sel.p = p;
  for (const auto& [machine, set] : validation) {
    if (set.scores.empty()) fail(Errc::invalid_input, "no validation scores for " + machine);
    MachineSelection ms;
    bool have = false;
    for (auto kind : kScorerKinds) {
      const auto it = set.scores.find(kind);
      if (it == set.scores.end()) continue;
      const auto& scores = it->second;
      if (scores.size() != set.labels.size())
        fail(Errc::invalid_input, "validation score/label count mismatch for " + machine);
      std::vector<double> normal, anomaly;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        if (set.labels[i] == Label::normal) normal.push_back(scores[i]);
        if (set.labels[i] == Label::anomaly) anomaly.push_back(scores[i]);
      }
      if (normal.empty() || anomaly.empty())
        fail(Errc::invalid_input, "validation split of machine type " + machine +
                                      " does not contain both classes");
      ScorerMetrics m;
      m.auc = auc(normal, anomaly);
      m.pauc = pauc(normal, anomaly, p);
      m.m = 0.5 * (m.auc + m.pauc);
      ms.candidates[kind] = m;
      if (!have || m.m > ms.metrics.m) {
        ms.winner = kind;
        ms.metrics = m;
        have = true;
      }
    }
    sel.by_machine.emplace(machine, std::move(ms));
  }
  return sel;
}

std::string selection_json(const DetectorSelection& selection) {
  nlohmann::ordered_json j;
  j["p"] = selection.p;
  auto& machines = j["machines"] = nlohmann::ordered_json::object();
  for (const auto& [machine, ms] : selection.by_machine) {
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (const auto& [kind, m] : ms.candidates)
      c[std::string(to_string(kind))] = {{"auc", m.auc}, {"pauc", m.pauc}, {"m", m.m}};
    machines[machine] = {{"winner", to_string(ms.winner)},
                         {"auc", ms.metrics.auc},
                         {"pauc", ms.metrics.pauc},
                         {"m", ms.metrics.m},
                         {"candidates", c}};
  }
  return j.dump(2) + "\n";
}

ScoreTable score_test(const std::vector<TestClip>& clips, const DetectorSelection& selection,
                      const std::map<std::string, FittedDetectors>& fitted) {
  ScoreTable table;
  table.reserve(clips.size());
  for (const auto& c : clips) {
    const auto s = selection.by_machine.find(c.machine_type);
    if (s == selection.by_machine.end())
      fail(Errc::invalid_state, "no detector selected for machine type " + c.machine_type);
    const auto f = fitted.find(c.machine_type);
    if (f == fitted.end())
      fail(Errc::invalid_state, "no fitted detectors for machine type " + c.machine_type);
    const ScorerKind kind = s->second.winner;
    table.push_back({c.clip_path, c.machine_type, c.label, std::string(to_string(kind)),
                     f->second.score(kind, c.joint, c.s_r)});
  }
  return table;
}

void save_detectors(Archive& archive, const std::map<std::string, FittedDetectors>& fitted,
                    const DetectorSelection& selection, const DetectConfig& cfg) {
  const nlohmann::ordered_json jc = {{"knn_k", cfg.knn_k},
                                     {"lof_k", cfg.lof_k},
                                     {"lof_eps", cfg.lof_eps},
                                     {"gmm_components", cfg.gmm.components},
                                     {"gmm_max_iter", cfg.gmm.max_iter},
                                     {"gmm_tol", cfg.gmm.tol},
                                     {"gmm_var_floor", cfg.gmm.var_floor},
                                     {"gmm_seed", cfg.gmm.seed},
                                     {"sos_perplexity", cfg.sos_perplexity}};
  archive.set_meta("detect.config", jc.dump());
  archive.set_meta("detect.selection", selection_json(selection));
  for (const auto& [machine, f] : fitted) {
    const std::string pre = "det/" + machine + "/";
    archive.put_matrix(pre + "train", f.train);
    archive.put_vector(pre + "mel_mean", f.space.mel.mean);
    archive.put_vector(pre + "mel_scale", f.space.mel.scale);
    archive.put_vector(pre + "wave_mean", f.space.wave.mean);
    archive.put_vector(pre + "wave_scale", f.space.wave.scale);
    if (f.gmm) {
      archive.put_vector(pre + "gmm/weights", f.gmm->weights());
      archive.put_matrix(pre + "gmm/means", f.gmm->means());
      archive.put_matrix(pre + "gmm/variances", f.gmm->variances());
    }
    if (f.sos) archive.put_vector(pre + "sos/betas", f.sos->betas());
  }
}

}  // namespace tldg
