// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance gates. Prints one PASS/FAIL line per gate and exits non-zero
// when any gate fails. The pipeline gates train the desk preset twice in a
// scratch directory (TLDG_ACCEPT_DIR, default <tmp>/tldg_acceptance).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "tldg/config.hpp"
#include "tldg/dataio.hpp"
#include "tldg/detect.hpp"
#include "tldg/diffusion.hpp"
#include "tldg/ldgan.hpp"
#include "tldg/metrics.hpp"
#include "tldg/ops.hpp"
#include "tldg/pipeline.hpp"
#include "tldg/tmixup.hpp"

namespace fs = std::filesystem;
using namespace tldg;
using Clock = std::chrono::steady_clock;

namespace {

struct Gate {
  int id;
  std::string name;
  bool pass = true;
  std::string detail;
};

std::vector<Gate> gates;

void report(Gate g) {
  std::printf("%s [%d] %s%s%s\n", g.pass ? "PASS" : "FAIL", g.id, g.name.c_str(), g.detail.empty() ? "" : ": ",
              g.detail.c_str());
  std::fflush(stdout);
  gates.push_back(std::move(g));
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Eigen::MatrixXd gaussian(int n, int d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = g(rng);
  return m;
}

// ---------------------------------------------------------------------------

void gate_metrics() {
  Gate g{1, "auc and pauc(p=0.1) match brute force on 1000 tied lists", true, ""};
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(1, 12), levels(2, 6);
  double worst = 0.0;
  int p1_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int lv = levels(rng);
    std::uniform_int_distribution<int> lvl(0, lv - 1);
    std::vector<double> n(static_cast<std::size_t>(size(rng))), a(static_cast<std::size_t>(size(rng)));
    for (auto& v : n) v = lvl(rng) / 4.0;
    for (auto& v : a) v = lvl(rng) / 4.0;
    worst = std::max(worst, std::abs(auc(n, a) - oracle::auc(n, a)));
    worst = std::max(worst, std::abs(pauc(n, a, 0.1) - oracle::pauc(n, a, 0.1)));
    if (pauc(n, a, 1.0) != auc(n, a)) ++p1_mismatch;
  }
  const double secs = seconds_since(t0);
  g.pass = worst <= 1e-12 && p1_mismatch == 0 && secs < 10.0;
  g.detail = fmt("max error %.3g, pauc(p=1) != auc in %.0f cases, %.2f s", worst, p1_mismatch, secs);
  report(g);
}

void gate_detectors() {
  Gate g{2, "knn, lof, gmm(m=1) and sos match brute force on 2-D instances", true, ""};
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> size(12, 30);
  double e_knn = 0, e_lof = 0, e_gmm = 0, e_sos = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = size(rng);
    const Eigen::MatrixXd train = gaussian(n, 2, rng);
    GmmConfig g1;
    g1.components = 1;
    const KnnScorer knn(train, 5);
    const LofScorer lof(train, 10);
    const GmmScorer gmm(train, g1);
    const SosScorer sos(train, 6.0);
    for (int q = 0; q < 5; ++q) {
      const Eigen::VectorXd x = gaussian(1, 2, rng, 1.5).row(0).transpose();
      e_knn = std::max(e_knn, std::abs(knn.score(x) - oracle::knn(train, x, 5)));
      e_lof = std::max(e_lof, std::abs(lof.score(x) - oracle::lof(train, x, 10)));
      e_gmm = std::max(e_gmm, std::abs(gmm.score(x) - oracle::gaussian_nll(train, x)));
      e_sos = std::max(e_sos, std::abs(sos.score(x) - oracle::sos(train, x, 6.0)));
    }
  }
  const double secs = seconds_since(t0);
  g.pass = e_knn <= 1e-6 && e_lof <= 1e-6 && e_gmm <= 1e-8 && e_sos <= 1e-6 && secs < 30.0;
  g.detail = fmt("knn %.2g lof %.2g gmm %.2g", e_knn, e_lof, e_gmm) + fmt(" sos %.2g, %.2f s", e_sos, secs);
  report(g);
}

void gate_tmixup() {
  Gate g{3, "tmixup algebra", true, ""};
  std::mt19937_64 rng(303);
  std::normal_distribution<double> gl(0.0, 4.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_sum = 0.0;
  for (int i = 0; i < 1000; ++i) {
    PoolingWeights w;
    w.logits = Eigen::Vector3d(gl(rng), gl(rng), gl(rng));
    worst_sum = std::max(worst_sum, std::abs(w.weights().sum() - 1.0));
  }
  int order_violations = 0;
  for (int i = 0; i < 10000; ++i) {
    Eigen::MatrixXd c(1 + static_cast<int>(rng() % 128), 1);
    for (int f = 0; f < c.rows(); ++f) c(f, 0) = u(rng) < 0.2 ? 0.0 : u(rng) * 5.0;
    const auto p = pool_components(c, 3.0);
    if (!(p(1, 0) <= p(2, 0) && p(2, 0) <= p(0, 0))) ++order_violations;
  }
  int identity_failures = 0, masked_failures = 0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(16, 20).cwiseAbs();
    Eigen::VectorXd mask(20);
    for (int t = 0; t < 20; ++t) mask[t] = u(rng) < 0.5 ? 0.0 : 1.0;
    if (tmixup(x, Eigen::VectorXd::Ones(20), u(rng)) != x) ++identity_failures;
    if (tmixup(x, mask, 1.0) != x) ++identity_failures;
    const double lam = u(rng);
    const Eigen::MatrixXd y = tmixup(x, mask, lam);
    for (int t = 0; t < 20; ++t)
      for (int f = 0; f < 16; ++f) {
        const double expect = mask[t] == 1.0 ? x(f, t) : lam * x(f, t);
        if (y(f, t) != expect) ++masked_failures;
      }
  }
  g.pass = worst_sum <= 1e-6 && order_violations == 0 && identity_failures == 0 && masked_failures == 0;
  g.detail = fmt("softmax sum error %.2g, ordering violations %.0f, identity failures %.0f", worst_sum,
                 order_violations, identity_failures) +
             fmt(", masked mismatches %.0f", masked_failures);
  report(g);
}

void gate_diffusion() {
  Gate g{4, "forward diffusion marginal variance and spot check", true, ""};
  std::mt19937_64 rng(404);
  std::normal_distribution<double> gauss;
  std::uniform_int_distribution<int> steps(10, 1000);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  std::string pairs;
  for (int k = 0; k < 5; ++k) {
    const int n = steps(rng);
    const double b0 = 1e-5 + 1e-3 * u(rng);
    const double b1 = 0.005 + 0.03 * u(rng);
    const auto s = DiffusionSchedule::linear(n, b0, b1);
    const int t = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    const Eigen::VectorXd z0 = Eigen::VectorXd::Constant(1, gauss(rng));
    double sum = 0.0, sq = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
      const double v = q_sample(s, z0, t, Eigen::VectorXd::Constant(1, gauss(rng)))[0];
      sum += v;
      sq += v * v;
    }
    const double mean = sum / draws;
    const double var = (sq - draws * mean * mean) / (draws - 1);
    worst = std::max(worst, std::abs(var - (1.0 - s.alpha_bar(t))));
    pairs += fmt(" (t=%.0f/%.0f)", t, n);
  }
  const DiffusionSchedule one({0.36});
  const auto z = q_sample(one, Eigen::Vector2d(1, 0), 1, Eigen::Vector2d(0, 1));
  const double spot = std::max(std::abs(z[0] - 0.8), std::abs(z[1] - 0.6));
  g.pass = worst <= 1e-2 && spot <= 1e-12;
  g.detail = fmt("max |Var - (1 - alpha_bar)| %.4f, spot error %.2g;", worst, spot) + pairs;
  report(g);
}

void gate_gradients() {
  Gate g{5, "pool_time and gradient_penalty gradients vs central differences", true, ""};
  double worst_pool = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const ag::Tensor spec = testing::random_tensor({1, 8, 8}, seed, 0.0, 1.0);
    const ag::Tensor probe = testing::random_tensor({1, 8}, seed + 1000);
    auto f = [&](const std::vector<ag::Var>& v) {
      return ag::sum(ag::mul_const(pool_time(ag::Var::constant(spec), v[0], 3.0), probe));
    };
    worst_pool = std::max(
        worst_pool, testing::gradcheck(f, {ag::Var::parameter(testing::random_tensor({3}, seed + 2000, -2, 2))},
                                       1e-6, 1e-6));
  }
  double worst_gp = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ag::Tensor real = testing::random_tensor({4, 1, 3, 3}, seed + 10);
    const ag::Tensor fake = testing::random_tensor({4, 1, 3, 3}, seed + 20);
    const std::vector<double> u = {0.1, 0.4, 0.6, 0.95};
    auto f = [&](const std::vector<ag::Var>& p) {
      const Critic d = [&](const ag::Var& x) {
        const ag::Var flat = ag::reshape(x, {x.shape()[0], 9});
        return ag::matmul(ag::silu(ag::add(ag::matmul(flat, p[0]), ag::channel_broadcast(p[1], {x.shape()[0], 6}))),
                          p[2]);
      };
      return gradient_penalty(d, real, fake, u);
    };
    worst_gp = std::max(worst_gp, testing::gradcheck(f,
                                                     {ag::Var::parameter(testing::random_tensor({9, 6}, seed + 30)),
                                                      ag::Var::parameter(testing::random_tensor({6}, seed + 40)),
                                                      ag::Var::parameter(testing::random_tensor({6, 1}, seed + 50))},
                                                     1e-6, 1e-3));
  }
  g.pass = worst_pool <= 1e-4 && worst_gp <= 1e-3;
  g.detail = fmt("pool_time worst relative error %.2g, gradient penalty %.2g", worst_pool, worst_gp);
  report(g);
}

void gate_selection() {
  Gate g{7, "selection by (AUC + pAUC) / 2 with tie-break and monotone invariance", true, ""};
  std::mt19937_64 rng(707);
  std::normal_distribution<double> gauss;
  int wrong = 0, not_invariant = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ValidationSet vs;
    for (int i = 0; i < 20; ++i) vs.labels.push_back(i < 12 ? Label::normal : Label::anomaly);
    for (auto k : kScorerKinds) {
      auto& s = vs.scores[k];
      // Coarse scores so exact ties between scorers happen.
      const double shift = static_cast<double>(rng() % 3);
      for (int i = 0; i < 20; ++i) s.push_back(std::round(2.0 * (gauss(rng) + (i >= 12 ? shift : 0.0))));
    }
    if (trial % 10 == 0) vs.scores[ScorerKind::sos] = vs.scores[ScorerKind::lof];
    const auto sel = select({{"m", vs}}).by_machine.at("m");
    // Brute force: first kind in order with the maximal m.
    ScorerKind best = ScorerKind::recon;
    double best_m = -1.0;
    for (auto k : kScorerKinds) {
      std::vector<double> n, a;
      for (int i = 0; i < 20; ++i) (vs.labels[i] == Label::normal ? n : a).push_back(vs.scores[k][i]);
      const double m = 0.5 * (oracle::auc(n, a) + oracle::pauc(n, a, 0.1));
      if (m > best_m + 1e-12) {
        best_m = m;
        best = k;
      }
    }
    if (sel.winner != best) ++wrong;
    for (auto& [k, s] : vs.scores)
      for (auto& v : s) v = std::exp(0.5 * v) * 3.0 - 1.0;
    if (select({{"m", vs}}).by_machine.at("m").winner != sel.winner) ++not_invariant;
  }
  g.pass = wrong == 0 && not_invariant == 0;
  g.detail = fmt("wrong winners %.0f / 100, monotone-transform changes %.0f / 100", wrong, not_invariant);
  report(g);
}

// ---------------------------------------------------------------------------
// Pipeline gates.

RunConfig desk_config(const fs::path& work, const std::string& run) {
  RunConfig c = preset_config("desk");
  c.seed = 20260101;
  c.data.synth.seed = c.seed;
  c.data.synth_root = work / "data" / "synth";
  c.out_dir = work / "runs" / run;
  c.validate();
  return c;
}

struct PipelineRun {
  RunConfig cfg;
  TrainOutcome train;
  EvalOutcome eval;
  double seconds = 0.0;
  double sn_worst = 0.0;
  int sn_steps = 0;
};

PipelineRun train_and_eval(const RunConfig& cfg, bool audit_spectral_norm) {
  PipelineRun run;
  run.cfg = cfg;
  TrainOptions opt;
  if (audit_spectral_norm) {
    opt.hooks.on_step = [&run](const StepStats&, const LdganModel& m) {
      if (run.sn_steps >= 200) return;
      ++run.sn_steps;
      for (const auto& sn : m.spectral_norms()) {
        const ag::Var wn = sn.normalized();
        const int rows = wn.shape()[0];
        const int cols = static_cast<int>(wn.size()) / rows;
        const Eigen::MatrixXd mat =
            Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>>(wn.value().data(), rows, cols);
        run.sn_worst = std::max(run.sn_worst, std::abs(nn::top_singular_value(mat) - 1.0));
      }
    };
  }
  const auto t0 = Clock::now();
  run.train = cmd_train(cfg, opt);
  run.eval = cmd_eval(cfg);
  run.seconds = seconds_since(t0);
  return run;
}

void gate_end_to_end(const PipelineRun& run, double synth_seconds) {
  Gate g{8, "desk run: per-machine AUC >= 0.85, pAUC >= 0.60, selected scorer AUC >= 0.80, <= 45 min", true, ""};
  const double minutes = (run.seconds + synth_seconds) / 60.0;
  g.pass = minutes <= 45.0 && run.eval.report.machines.size() == 3;
  std::string per;
  for (const auto& m : run.eval.report.machines) {
    const double a = m.auc.value_or(0.0), p = m.pauc.value_or(0.0);
    if (!(a >= 0.85 && p >= 0.60 && a - 0.5 >= 0.3)) g.pass = false;
    per += " " + m.machine_type + "=" + m.scorer_kind + fmt("(%.3f/%.3f)", a, p);
  }
  g.detail = fmt("%.1f min;", minutes) + per;
  report(g);
}

void gate_localization(const RunConfig& cfg) {
  Gate g{9, "localization peak within +-3 frames of an impulse in >= 70% of impulse clips", true, ""};
  const auto events = read_anomaly_events(cfg.data.synth_root);
  const auto loc = cmd_localize(cfg, "label=anomaly,limit=100000");
  const double hop_s = static_cast<double>(cfg.features.hop) / cfg.features.sample_rate_hz;
  int clips = 0, hits = 0;
  for (std::size_t i = 0; i < loc.clips.size(); ++i) {
    for (const auto& e : events) {
      if (e.family != AnomalyFamily::impulse_train || e.path != cfg.data.synth_root / loc.clips[i]) continue;
      ++clips;
      double nearest = 1e9;
      for (double t : e.times_s) nearest = std::min(nearest, std::abs(loc.peak_frames[i] - t / hop_s));
      if (nearest <= 3.0) ++hits;
    }
  }
  const double rate = clips ? static_cast<double>(hits) / clips : 0.0;
  g.pass = clips > 0 && rate >= 0.70;
  g.detail = fmt("%.0f of %.0f impulse clips (%.0f%%)", hits, clips, 100.0 * rate);
  report(g);
}

bool same_tensors(const Archive& x, const Archive& y) {
  if (x.tensors().size() != y.tensors().size()) return false;
  for (const auto& [name, t] : x.tensors()) {
    if (!y.has(name)) return false;
    const auto& u = y.get(name);
    if (u.shape() != t.shape() || u.vec() != t.vec()) return false;
  }
  return true;
}

void gate_determinism(const PipelineRun& a, const PipelineRun& b) {
  Gate g{10, "two seeded train + eval runs give byte-identical score tables and reports", true, ""};
  const RunLayout la(a.cfg.out_dir), lb(b.cfg.out_dir);
  std::vector<std::string> differing;
  for (const char* name : {"scores.tsv", "validation_scores.tsv", "selection.json", "report.tsv", "summary.json"}) {
    const auto x = slurp(la.eval_dir() / name), y = slurp(lb.eval_dir() / name);
    if (x.empty() || x != y) differing.push_back(name);
  }
  // Checkpoint metadata echoes the output directory, so compare the tensors.
  if (!same_tensors(read_archive(la.checkpoint()), read_archive(lb.checkpoint())))
    differing.push_back("model.ckpt tensors");
  g.pass = differing.empty();
  g.detail = differing.empty() ? "scores, selection, reports and model weights identical" : "differs:";
  for (const auto& d : differing) g.detail += " " + d;
  report(g);
}

// Side checks that are not gates; printed as INFO lines.
void info_training_curve(const PipelineRun& run) {
  const auto& probe = run.train.history.probe_noise;
  bool decreasing = probe.size() >= 6;
  for (std::size_t i = 1; i < std::min<std::size_t>(probe.size(), 6); ++i)
    if (!(probe[i] < probe[i - 1])) decreasing = false;
  std::string vals;
  for (std::size_t i = 0; i < std::min<std::size_t>(probe.size(), 6); ++i) vals += fmt(" %.3f", probe[i]);
  std::printf("INFO probe L_noise strictly decreasing over the first 5 epochs: %s (%s )\n",
              decreasing ? "yes" : "no", vals.c_str());
}

void info_normal_calibration(const RunConfig& cfg) {
  const Manifest manifest = load_corpus(cfg);
  const LdganModel model = LdganModel::load(read_archive(RunLayout(cfg.out_dir).checkpoint()));
  const LogMelExtractor extractor(cfg.features);
  int below = 0, total = 0;
  for (const auto& machine : manifest.machine_types()) {
    auto s_r = [&](Split split, Label label) {
      std::vector<Eigen::MatrixXd> specs;
      std::vector<std::uint64_t> seeds;
      for (const auto* r : manifest.select(machine, split)) {
        if (r->label != label) continue;
        specs.push_back(clip_features(*r, extractor).values);
        seeds.push_back(clip_noise_seed(cfg.seed, fs::relative(r->path, cfg.corpus_dir()).generic_string()));
      }
      std::vector<double> out;
      const auto recs = model.reconstruct(specs, seeds);
      for (const auto& rec : recs) out.push_back(recon_score(rec.z_real, rec.z_rec(cfg.score_latent_source)));
      return out;
    };
    auto train = s_r(Split::train, Label::normal);
    std::sort(train.begin(), train.end());
    const double p95 = train[static_cast<std::size_t>(std::ceil(0.95 * train.size())) - 1];
    for (double v : s_r(Split::test, Label::normal)) {
      ++total;
      if (v < p95) ++below;
    }
  }
  std::printf("INFO normal test s_r below the train 95th percentile: %d of %d (%.0f%%)\n", below, total,
              total ? 100.0 * below / total : 0.0);
}

void gate_spectral_norm(const PipelineRun& run) {
  Gate g{6, "spectral-normalized weights keep top singular value in [0.999, 1.001] over 200 desk steps", true, ""};
  g.pass = run.sn_steps == 200 && run.sn_worst <= 1e-3;
  g.detail = fmt("%.0f steps audited, worst |sigma_max - 1| %.2g", run.sn_steps, run.sn_worst);
  report(g);
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  bool fast_only = false;
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--no-pipeline") fast_only = true;

  gate_metrics();
  gate_detectors();
  gate_tmixup();
  gate_diffusion();
  gate_gradients();
  gate_selection();

  if (!fast_only) {
    const char* env = std::getenv("TLDG_ACCEPT_DIR");
    const fs::path work = env ? fs::path(env) : fs::temp_directory_path() / "tldg_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);
    try {
      const RunConfig a_cfg = desk_config(work, "a");
      const auto t0 = Clock::now();
      cmd_synth(a_cfg);
      const double synth_seconds = seconds_since(t0);
      const PipelineRun a = train_and_eval(a_cfg, true);
      gate_spectral_norm(a);
      gate_end_to_end(a, synth_seconds);
      gate_localization(a_cfg);
      info_training_curve(a);
      info_normal_calibration(a_cfg);
      const PipelineRun b = train_and_eval(desk_config(work, "b"), false);
      gate_determinism(a, b);
    } catch (const std::exception& e) {
      for (int id : {6, 8, 9, 10}) {
        const bool done = std::any_of(gates.begin(), gates.end(), [&](const Gate& g) { return g.id == id; });
        if (!done) report({id, "pipeline gate", false, std::string("aborted: ") + e.what()});
      }
    }
  }

  const auto failed = std::count_if(gates.begin(), gates.end(), [](const Gate& g) { return !g.pass; });
  std::printf("%zu gates run, %ld failed\n", gates.size(), static_cast<long>(failed));
  return failed == 0 ? 0 : 1;
}
