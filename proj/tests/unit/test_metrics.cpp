// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "tldg/error.hpp"
#include "tldg/metrics.hpp"

using namespace tldg;

namespace {

std::vector<double> random_scores(std::mt19937_64& rng, int n, int levels) {
  std::uniform_int_distribution<int> d(0, levels - 1);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = d(rng) * 0.25;
  return v;
}

}  // namespace

TEST_CASE("auc examples") {
  CHECK(auc(std::vector{0.1, 0.2}, std::vector{0.8, 0.9}) == 1.0);
  CHECK(auc(std::vector{0.3, 0.3}, std::vector{0.3, 0.3}) == 0.5);
  CHECK(auc(std::vector{0.4, 0.6}, std::vector{0.5, 0.7}) == 0.75);
  CHECK_THROWS_AS(auc(std::vector<double>{}, std::vector{1.0}), Error);
}

TEST_CASE("pauc examples") {
  CHECK(pauc(std::vector{0.1, 0.2}, std::vector{0.8, 0.9}, 0.1) == 1.0);
  CHECK(pauc(std::vector{0.1, 0.2}, std::vector{0.8, 0.9}, 0.5) == 1.0);
  // The anomaly ranks above 9 of 10 normals: TPR only jumps to 1 at FPR 0.1,
  // so the area over [0, 0.1] is zero.
  std::vector<double> normals;
  for (int i = 1; i <= 10; ++i) normals.push_back(i);
  CHECK(pauc(normals, std::vector{9.5}, 0.1) == doctest::Approx(0.0));
  CHECK(pauc(normals, std::vector{9.5}, 0.1) == doctest::Approx(oracle::pauc(normals, {9.5}, 0.1)));
  CHECK_THROWS_AS(pauc(normals, std::vector{9.5}, 0.0), Error);
  CHECK_THROWS_AS(pauc(normals, std::vector<double>{}, 0.1), Error);
}

TEST_CASE("auc and pauc match the brute-force oracles") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(1, 12), levels(2, 8);
  for (int trial = 0; trial < 500; ++trial) {
    const int lv = levels(rng);
    const auto n = random_scores(rng, size(rng), lv);
    const auto a = random_scores(rng, size(rng), lv);
    CHECK(std::abs(auc(n, a) - oracle::auc(n, a)) <= 1e-12);
    CHECK(std::abs(pauc(n, a, 0.1) - oracle::pauc(n, a, 0.1)) <= 1e-12);
    CHECK(std::abs(pauc(n, a, 0.37) - oracle::pauc(n, a, 0.37)) <= 1e-12);
    CHECK(pauc(n, a, 1.0) == auc(n, a));
  }
}

TEST_CASE("auc properties") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> n(9), a(7);
    for (auto& v : n) v = g(rng);
    for (auto& v : a) v = g(rng) + 0.5;
    CHECK(auc(n, a) + auc(a, n) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> tn, ta;
    for (double v : n) tn.push_back(std::exp(3 * v) + 1);
    for (double v : a) ta.push_back(std::exp(3 * v) + 1);
    CHECK(auc(tn, ta) == auc(n, a));
    CHECK(pauc(tn, ta, 0.1) == pauc(n, a, 0.1));
    const double pa = pauc(n, a, 0.1);
    CHECK(pa >= 0.0);
    CHECK(pa <= 1.0);
  }
}

TEST_CASE("report aggregation and rendering") {
  ScoreTable t = {
      {"a/1.wav", "m1", Label::normal, "knn", 0.1}, {"a/2.wav", "m1", Label::anomaly, "knn", 0.9},
      {"a/3.wav", "m1", Label::normal, "knn", 0.5}, {"a/4.wav", "m1", Label::anomaly, "knn", 0.4},
      {"b/1.wav", "m2", Label::normal, "gmm", 1.0}, {"b/2.wav", "m2", Label::anomaly, "gmm", 2.0},
      {"c/1.wav", "m3", Label::normal, "sos", 1.0},
  };
  const auto rep = build_report(t, 0.1, R"({"p":0.1})");
  REQUIRE(rep.machines.size() == 3);
  CHECK(*rep.machines[0].auc == 0.75);
  CHECK(*rep.machines[1].auc == 1.0);
  CHECK_FALSE(rep.machines[2].auc.has_value());
  CHECK(*rep.mean_auc == doctest::Approx(0.875));
  const std::string table = render_report_table(rep);
  CHECK(table.find("# pAUC p=0.1") == 0);
  CHECK(table.find("m3\tsos\tnull\tnull\t1\t0") != std::string::npos);
  CHECK(table.find("Average\t-\t0.875000") != std::string::npos);
  CHECK(render_report_table(build_report(t, 0.1, R"({"p":0.1})")) == table);
  CHECK(render_report_summary(rep) == render_report_summary(build_report(t, 0.1, R"({"p":0.1})")));
}

TEST_CASE("two machines average") {
  ScoreTable t;
  // m1 AUC 0.8 (4 of 5 pairs), m2 AUC 0.9 (9 of 10 pairs).
  for (double s : {1.0, 2.0, 3.0, 4.0, 6.0}) t.push_back({"x", "m1", Label::normal, "recon", s});
  t.push_back({"y", "m1", Label::anomaly, "recon", 5.0});
  for (double s : {1.0, 2.0, 3.0, 4.0, 6.0}) t.push_back({"x", "m2", Label::normal, "recon", s});
  t.push_back({"y", "m2", Label::anomaly, "recon", 5.5});
  t.push_back({"y", "m2", Label::anomaly, "recon", 7.0});
  const auto rep = build_report(t, 0.1);
  CHECK(*rep.machines[0].auc == doctest::Approx(0.8));
  CHECK(*rep.machines[1].auc == doctest::Approx(0.9));
  CHECK(*rep.mean_auc == doctest::Approx(0.85));
}

TEST_CASE("score table round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "tldg_metrics_test";
  std::filesystem::create_directories(dir);
  ScoreTable t = {{"m/test/anomaly_id_00_00000001.wav", "m", Label::anomaly, "lof", 1.0 / 3.0},
                  {"m/test/normal_id_00_00000001.wav", "m", Label::normal, "lof", -2.5e-17}};
  write_score_table(dir / "s.tsv", t);
  const auto back = read_score_table(dir / "s.tsv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].score == t[0].score);
  CHECK(back[1].score == t[1].score);
  CHECK(back[0].label == Label::anomaly);
  CHECK(back[1].clip_path == t[1].clip_path);
  std::filesystem::remove_all(dir);
}
