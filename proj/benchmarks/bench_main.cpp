// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "tldg/dataio.hpp"
#include "tldg/detect.hpp"
#include "tldg/features.hpp"
#include "tldg/metrics.hpp"
#include "tldg/ops.hpp"

namespace {

Eigen::MatrixXd gaussian_rows(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = g(rng);
  return m;
}

void BM_LogMel10s(benchmark::State& state) {
  tldg::SynthSpec spec;
  const auto clip = tldg::synthesize_clip(spec, 0, 1, std::nullopt);
  const tldg::LogMelExtractor ex(tldg::FeatureConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(ex.compute(clip.wave));
}
BENCHMARK(BM_LogMel10s)->Unit(benchmark::kMillisecond);

template <class Fit>
void score_loop(benchmark::State& state, Fit fit) {
  const Eigen::MatrixXd train = gaussian_rows(64, 320, 1);
  const Eigen::MatrixXd queries = gaussian_rows(32, 320, 2);
  const auto scorer = fit(train);
  for (auto _ : state)
    for (Eigen::Index i = 0; i < queries.rows(); ++i)
      benchmark::DoNotOptimize(scorer.score(queries.row(i).transpose()));
}

void BM_KnnScore(benchmark::State& s) { score_loop(s, [](const auto& t) { return tldg::KnnScorer(t, 5); }); }
void BM_LofScore(benchmark::State& s) { score_loop(s, [](const auto& t) { return tldg::LofScorer(t, 10); }); }
void BM_GmmScore(benchmark::State& s) {
  score_loop(s, [](const auto& t) { return tldg::GmmScorer(t, tldg::GmmConfig{}); });
}
void BM_SosScore(benchmark::State& s) { score_loop(s, [](const auto& t) { return tldg::SosScorer(t, 15.0); }); }
BENCHMARK(BM_KnnScore)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LofScore)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GmmScore)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SosScore)->Unit(benchmark::kMicrosecond);

void BM_GmmFit(benchmark::State& state) {
  const Eigen::MatrixXd train = gaussian_rows(64, 320, 3);
  for (auto _ : state) benchmark::DoNotOptimize(tldg::GmmScorer(train, tldg::GmmConfig{}));
}
BENCHMARK(BM_GmmFit)->Unit(benchmark::kMillisecond);

void BM_AucPauc(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::vector<double> n(static_cast<std::size_t>(state.range(0))), a(n.size());
  for (auto& v : n) v = g(rng);
  for (auto& v : a) v = g(rng) + 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tldg::auc(n, a));
    benchmark::DoNotOptimize(tldg::pauc(n, a, 0.1));
  }
}
BENCHMARK(BM_AucPauc)->Arg(100)->Arg(10000);

void BM_Conv2dForward(benchmark::State& state) {
  using namespace tldg::ag;
  const auto x = Var::constant(Tensor({16, 8, 64, 160}, 0.5));
  const auto w = Var::constant(Tensor({16, 8, 4, 4}, 0.01));
  const tldg::ag::ConvGeom g{4, 4, 2, 1};
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, g));
}
BENCHMARK(BM_Conv2dForward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
