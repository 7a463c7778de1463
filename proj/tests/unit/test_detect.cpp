// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "tldg/detect.hpp"
#include "tldg/error.hpp"

using namespace tldg;

namespace {

Eigen::MatrixXd gaussian(int n, int d, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = g(rng);
  return m;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("recon score") {
  CHECK(recon_score(vec({1, 2}), vec({1, 2})) == 0.0);
  CHECK(recon_score(vec({1, 2}), vec({3, 4})) == 8.0);
  CHECK(recon_score(3.0 * vec({1, 2}), 3.0 * vec({3, 4})) == doctest::Approx(72.0));
  CHECK_THROWS_AS(recon_score(vec({1, 2}), vec({1})), Error);
}

TEST_CASE("knn examples") {
  Eigen::MatrixXd t(2, 2);
  t << 0, 0, 0, 2;
  CHECK(KnnScorer(t, 2).score(vec({0, 1})) == doctest::Approx(1.0));
  CHECK(KnnScorer(t, 1).score(vec({0, 2})) == 0.0);
  CHECK_THROWS_AS(KnnScorer(t, 3), Error);

  // Rotation invariance.
  const Eigen::MatrixXd train = gaussian(20, 3, 5);
  const Eigen::VectorXd q = gaussian(1, 3, 6).row(0).transpose();
  const Eigen::MatrixXd r = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian(3, 3, 7)).householderQ();
  const double s0 = KnnScorer(train, 5).score(q);
  const double s1 = KnnScorer(train * r.transpose(), 5).score(r * q);
  CHECK(s1 == doctest::Approx(s0).epsilon(1e-12));
}

TEST_CASE("lof examples") {
  Eigen::MatrixXd grid(25, 2);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) grid.row(i * 5 + j) << i, j;
  const LofScorer lof(grid, 4);
  const double inside = lof.score(vec({2.0, 2.0}));
  CHECK(inside >= 0.8);
  CHECK(inside <= 1.2);
  CHECK(inside == doctest::Approx(oracle::lof(grid, vec({2.0, 2.0}), 4)).epsilon(1e-9));

  const Eigen::MatrixXd cluster = gaussian(20, 2, 9, 0.1);
  const LofScorer cl(cluster, 5);
  double prev = 0.0;
  for (double r : {1.0, 2.0, 4.0, 8.0}) {
    const double s = cl.score(vec({r, 0.0}));
    CHECK(s > prev);
    prev = s;
  }
  CHECK(prev > 10.0);

  Eigen::MatrixXd same = Eigen::MatrixXd::Ones(6, 2);
  const double deg = LofScorer(same, 3).score(vec({1.0, 1.0}));
  CHECK(std::isfinite(deg));
  CHECK(deg == doctest::Approx(1.0));
  CHECK_THROWS_AS(LofScorer(same, 1), Error);
  CHECK_THROWS_AS(LofScorer(same, 6), Error);
}

TEST_CASE("gmm single component closed form") {
  const Eigen::MatrixXd train = gaussian(200, 3, 13);
  GmmConfig cfg;
  cfg.components = 1;
  const GmmScorer g(train, cfg);
  const Eigen::VectorXd mu = g.means().row(0).transpose();
  const Eigen::VectorXd var = g.variances().row(0).transpose();
  const double mode = 1.5 * std::log(2 * M_PI) + 0.5 * var.array().log().sum();
  CHECK(g.score(mu) == doctest::Approx(mode).epsilon(1e-12));
  Eigen::VectorXd step = mu;
  step[1] += std::sqrt(var[1]);
  CHECK(g.score(step) - g.score(mu) == doctest::Approx(0.5).epsilon(1e-10));
  const Eigen::VectorXd q = vec({0.3, -1.2, 2.0});
  CHECK(std::abs(g.score(q) - oracle::gaussian_nll(train, q)) < 1e-8);
  // Monotone in Mahalanobis distance.
  double prev = -1e300;
  for (double r : {0.0, 0.5, 1.0, 2.0, 3.0}) {
    const double s = g.score(mu + r * var.cwiseSqrt());
    CHECK(s > prev);
    prev = s;
  }
}

TEST_CASE("gmm mixture fits two clusters") {
  Eigen::MatrixXd train(80, 2);
  train << gaussian(40, 2, 1, 0.2).rowwise() + Eigen::RowVector2d(-3, 0),
      gaussian(40, 2, 2, 0.2).rowwise() + Eigen::RowVector2d(3, 0);
  GmmConfig cfg;
  cfg.components = 2;
  const GmmScorer g(train, cfg);
  CHECK(g.iterations() <= cfg.max_iter);
  CHECK(g.score(vec({3, 0})) < g.score(vec({0, 0})));
  CHECK(g.score(vec({-3, 0})) < g.score(vec({0, 0})));
  // Refit is deterministic.
  CHECK(GmmScorer(train, cfg).score(vec({0.5, 0.5})) == g.score(vec({0.5, 0.5})));
}

TEST_CASE("gmm floors degenerate variances") {
  Eigen::MatrixXd train = gaussian(10, 2, 4);
  train.col(1).setConstant(2.0);
  GmmConfig cfg;
  cfg.components = 1;
  const GmmScorer g(train, cfg);
  CHECK(g.variances()(0, 1) == cfg.var_floor);
  CHECK(std::isfinite(g.score(vec({0, 2}))));
}

TEST_CASE("sos examples") {
  const Eigen::MatrixXd cloud = gaussian(30, 2, 21);
  const SosScorer sos(cloud, 5.0);
  const double inside = sos.score(cloud.row(3).transpose());
  CHECK(inside < 0.5);
  const double radius = cloud.rowwise().norm().maxCoeff();
  CHECK(sos.score(vec({10 * radius, 0})) > 0.9);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd q = gaussian(1, 2, 100 + i, 3.0).row(0).transpose();
    const double s = sos.score(q);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
  CHECK_THROWS_AS(SosScorer(cloud, 30.0), Error);
  CHECK_NOTHROW(SosScorer(cloud, 29.0));
}

TEST_CASE("scorers match brute-force oracles on small instances") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 12 + static_cast<int>(rng() % 19);  // 12..30
    const Eigen::MatrixXd train = gaussian(n, 2, 1000 + trial);
    const Eigen::VectorXd q = gaussian(1, 2, 2000 + trial, 1.5).row(0).transpose();
    CHECK(std::abs(KnnScorer(train, 5).score(q) - oracle::knn(train, q, 5)) < 1e-6);
    CHECK(std::abs(LofScorer(train, 10).score(q) - oracle::lof(train, q, 10)) < 1e-6);
    GmmConfig g1;
    g1.components = 1;
    CHECK(std::abs(GmmScorer(train, g1).score(q) - oracle::gaussian_nll(train, q)) < 1e-8);
    CHECK(std::abs(SosScorer(train, 8.0).score(q) - oracle::sos(train, q, 8.0)) < 1e-6);
  }
}

TEST_CASE("orientation: centroid scores below far queries") {
  const Eigen::MatrixXd train = gaussian(40, 4, 8);
  const Eigen::VectorXd c = train.colwise().mean().transpose();
  const double radius = (train.rowwise() - c.transpose()).rowwise().norm().maxCoeff();
  Eigen::VectorXd far = c;
  far[0] += 100 * radius;
  DetectConfig cfg;
  const auto f = fit_detectors(JointSpace{}, train, cfg, 1);
  for (auto kind : {ScorerKind::knn, ScorerKind::lof, ScorerKind::gmm, ScorerKind::sos})
    CHECK(f.score(kind, c, 0.0) <= f.score(kind, far, 0.0));
}

TEST_CASE("standardizer and joint space") {
  Eigen::MatrixXd mel(3, 2), wave(3, 1);
  mel << 1, 10, 2, 10, 3, 10;
  wave << 100, 200, 300;
  const auto js = JointSpace::fit(mel, wave);
  const auto j = js.join(vec({2, 10}), vec({300}));
  CHECK(j.size() == 3);
  CHECK(j[0] == doctest::Approx(0.0));
  CHECK(j[1] == doctest::Approx(0.0));
  CHECK(j[2] == doctest::Approx(std::sqrt(1.5)));
  CHECK((js.join_rows(mel, wave).colwise().mean().norm()) < 1e-12);
}

TEST_CASE("availability rules") {
  TrainEmbeddings e{gaussian(3, 2, 1), gaussian(3, 2, 2)};
  DetectConfig cfg;
  cfg.lof_k = 2;
  cfg.gmm.components = 1;
  cfg.sos_perplexity = 1.5;
  const auto fitted = fit_all({{"m", e}}, cfg);
  const auto& f = fitted.at("m");
  CHECK_FALSE(f.available(ScorerKind::knn));
  CHECK(f.available_kinds().size() == 4);

  TrainEmbeddings big{gaussian(40, 3, 3), gaussian(40, 2, 4)};
  const auto all = fit_all({{"m", big}}, DetectConfig{});
  CHECK(all.at("m").available_kinds().size() == 5);
}

TEST_CASE("selection") {
  // Scorer A (knn): AUC 1.0 pAUC 1.0 vs B (lof): reversed.
  ValidationSet vs;
  vs.labels = {Label::normal, Label::normal, Label::anomaly, Label::anomaly};
  vs.scores[ScorerKind::knn] = {0.1, 0.2, 0.8, 0.9};
  vs.scores[ScorerKind::lof] = {0.9, 0.8, 0.2, 0.1};
  auto sel = select({{"m", vs}});
  CHECK(sel.by_machine.at("m").winner == ScorerKind::knn);

  // All tie -> recon.
  ValidationSet tie;
  tie.labels = vs.labels;
  for (auto k : kScorerKinds) tie.scores[k] = {0.1, 0.2, 0.8, 0.9};
  CHECK(select({{"m", tie}}).by_machine.at("m").winner == ScorerKind::recon);

  // Higher mean of AUC and pAUC wins even with a lower AUC.
  ValidationSet ab;
  for (int i = 0; i < 10; ++i) ab.labels.push_back(Label::normal);
  for (int i = 0; i < 2; ++i) ab.labels.push_back(Label::anomaly);
  // gmm: anomalies rank 1st and 8th of normals -> AUC high, pAUC high.
  ab.scores[ScorerKind::gmm] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 4.5};
  // sos: one anomaly top, the other at the bottom.
  ab.scores[ScorerKind::sos] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 0};
  const auto s2 = select({{"m", ab}});
  const auto& c = s2.by_machine.at("m").candidates;
  const ScorerKind best = c.at(ScorerKind::gmm).m >= c.at(ScorerKind::sos).m ? ScorerKind::gmm : ScorerKind::sos;
  CHECK(s2.by_machine.at("m").winner == best);

  ValidationSet single;
  single.labels = {Label::normal, Label::normal};
  single.scores[ScorerKind::recon] = {1, 2};
  try {
    select({{"pump", single}});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_input);
    CHECK(std::string(e.what()).find("pump") != std::string::npos);
  }
}

TEST_CASE("selection is invariant to monotone transforms") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 30; ++trial) {
    ValidationSet vs;
    for (int i = 0; i < 12; ++i) vs.labels.push_back(i < 6 ? Label::normal : Label::anomaly);
    for (auto k : kScorerKinds) {
      auto& s = vs.scores[k];
      for (int i = 0; i < 12; ++i) s.push_back(g(rng) + (i >= 6 ? 0.7 : 0.0));
    }
    const auto base = select({{"m", vs}}).by_machine.at("m").winner;
    for (auto& [k, s] : vs.scores)
      for (auto& v : s) v = std::exp(2.0 * v) + 5.0;
    CHECK(select({{"m", vs}}).by_machine.at("m").winner == base);
  }
}

TEST_CASE("score_test dispatches to the selected scorer") {
  TrainEmbeddings e{gaussian(30, 2, 1), gaussian(30, 2, 2)};
  const auto fitted = fit_all({{"fan", e}}, DetectConfig{});
  DetectorSelection sel;
  sel.by_machine["fan"].winner = ScorerKind::knn;
  std::vector<TestClip> clips(3);
  for (int i = 0; i < 3; ++i) {
    clips[i].clip_path = "fan/" + std::to_string(i);
    clips[i].machine_type = "fan";
    clips[i].joint = gaussian(1, 4, 50 + i).row(0).transpose();
    clips[i].s_r = 1000.0;
  }
  const auto table = score_test(clips, sel, fitted);
  for (int i = 0; i < 3; ++i) {
    CHECK(table[i].scorer_kind == "knn");
    CHECK(table[i].score == fitted.at("fan").knn->score(clips[i].joint));
  }
  clips[0].machine_type = "pump";
  CHECK_THROWS_AS(score_test(clips, sel, fitted), Error);
}
