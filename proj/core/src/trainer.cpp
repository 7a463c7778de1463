// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "tldg/error.hpp"
#include "tldg/ops.hpp"

namespace tldg {

using ag::Tensor;
using ag::Var;
using ag::Shape;

void TrainConfig::validate() const {
  if (epochs < 0 || ae_epochs < 0) fail(Errc::invalid_config, "train: epoch counts must be >= 0");
  if (batch < 2) fail(Errc::invalid_config, "train: batch must be >= 2");
  if (!(lr > 0.0 && disc_lr > 0.0 && ae_lr > 0.0)) fail(Errc::invalid_config, "train: learning rates must be positive");
  if (lambda_stat < 0.0 || lambda_gp < 0.0) fail(Errc::invalid_config, "train: loss weights must be >= 0");
  if (probe_size < 1) fail(Errc::invalid_config, "train: probe_size must be >= 1");
  tmixup.validate();
}

std::string train_config_json(const TrainConfig& c) {
  nlohmann::json j = {{"epochs", c.epochs},
                      {"batch", c.batch},
                      {"lr", c.lr},
                      {"disc_lr", c.disc_lr},
                      {"adam_beta1", c.adam_beta1},
                      {"adam_beta2", c.adam_beta2},
                      {"ae_epochs", c.ae_epochs},
                      {"ae_lr", c.ae_lr},
                      {"lambda_stat", c.lambda_stat},
                      {"lambda_gp", c.lambda_gp},
                      {"seed", c.seed},
                      {"tmixup",
                       {{"enabled", c.tmixup.enabled},
                        {"tau_low", c.tmixup.tau_low},
                        {"tau_high", c.tmixup.tau_high},
                        {"beta_alpha", c.tmixup.beta_alpha},
                        {"power_p", c.tmixup.power_p}}}};
  return j.dump();
}

Tensor minmax_per_sample(const Tensor& batch) {
  const int n = batch.dim(0), f = batch.dim(2), t = batch.dim(3);
  const std::size_t per = static_cast<std::size_t>(f) * t;
  Tensor out({n, f, t});
  for (int s = 0; s < n; ++s) {
    const double* p = batch.data() + s * per;
    const auto [lo, hi] = std::minmax_element(p, p + per);
    double* q = out.data() + s * per;
    const double range = *hi - *lo;
    for (std::size_t i = 0; i < per; ++i) q[i] = range > 0.0 ? (p[i] - *lo) / range : 0.5;
  }
  return out;
}

namespace {

Tensor concat_batches(const std::vector<const Tensor*>& parts) {
  Shape shape = parts.front()->shape();
  int n = 0;
  for (const Tensor* p : parts) n += p->dim(0);
  shape[0] = n;
  Tensor out(shape);
  std::size_t off = 0;
  for (const Tensor* p : parts) {
    std::copy(p->vec().begin(), p->vec().end(), out.vec().begin() + static_cast<std::ptrdiff_t>(off));
    off += p->size();
  }
  return out;
}

Tensor normal_tensor(const Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Tensor t(shape);
  for (double& v : t.vec()) v = nd(rng);
  return t;
}

bool finite(const StepStats& s) {
  for (double v : {s.l_noise, s.l_stat, s.l_g, s.l_adv, s.l_gp, s.l_d})
    if (!std::isfinite(v)) return false;
  return true;
}

class MetricsLog {
 public:
  MetricsLog(const std::filesystem::path& path, bool append) {
    if (path.empty()) return;
    const bool fresh = !append || !std::filesystem::exists(path);
    os_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!os_) fail(Errc::io_error, "cannot write metrics log " + path.string());
    if (fresh) os_ << "step\tepoch\tL_noise\tL_stat\tL_G\tL_adv\tL_GP\tL_D\n";
  }
  void write(const StepStats& s) {
    if (!os_.is_open()) return;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%lld\t%d\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\n", static_cast<long long>(s.step),
                  s.epoch, s.l_noise, s.l_stat, s.l_g, s.l_adv, s.l_gp, s.l_d);
    os_ << buf;
    os_.flush();
  }

 private:
  std::ofstream os_;
};

std::vector<Var> concat_params(const nn::ParamTable& a, const nn::ParamTable& b) {
  std::vector<Var> v = a.vars();
  for (const Var& x : b.vars()) v.push_back(x);
  return v;
}

void save_adam(Archive& a, const std::string& prefix, const nn::Adam& opt) {
  a.put_scalar(prefix + "/t", static_cast<double>(opt.steps()));
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    a.put(prefix + "/m/" + std::to_string(i), opt.first_moments()[i]);
    a.put(prefix + "/v/" + std::to_string(i), opt.second_moments()[i]);
  }
}

void load_adam(const Archive& a, const std::string& prefix, nn::Adam& opt) {
  opt.set_steps(static_cast<std::int64_t>(a.get_scalar(prefix + "/t")));
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    const Tensor& m = a.get(prefix + "/m/" + std::to_string(i));
    if (m.shape() != opt.first_moments()[i].shape()) fail(Errc::invalid_state, "optimizer state shape mismatch");
    opt.first_moments()[i] = m;
    opt.second_moments()[i] = a.get(prefix + "/v/" + std::to_string(i));
  }
}

// Mean squared reconstruction error of the autoencoder, per sample.
std::vector<double> ae_errors(const LdganModel& model, const std::vector<Eigen::MatrixXd>& specs) {
  ag::NoGradGuard ng;
  std::vector<double> out;
  for (std::size_t s0 = 0; s0 < specs.size(); s0 += 16) {
    std::vector<const Eigen::MatrixXd*> chunk;
    for (std::size_t s = s0; s < std::min(specs.size(), s0 + 16); ++s) chunk.push_back(&specs[s]);
    Tensor x = model.to_model(chunk);
    Var rec = model.decode(model.encode(Var::constant(x)));
    const std::size_t per = x.size() / chunk.size();
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < per; ++k) {
        const double d = rec.value()[i * per + k] - x[i * per + k];
        acc += d * d;
      }
      out.push_back(acc / static_cast<double>(per));
    }
  }
  return out;
}

struct Trainer {
  const std::vector<Eigen::MatrixXd>& specs;
  const TrainConfig& cfg;
  const TrainHooks& hooks;
  TrainResult& r;
  std::mt19937_64 rng;
  MetricsLog log;

  std::vector<std::vector<std::size_t>> epoch_batches() {
    std::vector<std::size_t> order(specs.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t e = std::min(order.size(), i + static_cast<std::size_t>(cfg.batch));
      if (e - i >= 2) out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(e));
    }
    return out;
  }

  Tensor batch_tensor(const std::vector<std::size_t>& idx) const {
    std::vector<const Eigen::MatrixXd*> ptrs;
    for (std::size_t i : idx) ptrs.push_back(&specs[i]);
    return r.model.to_model(ptrs);
  }

  void pretrain_autoencoder() {
    LdganModel& m = r.model;
    nn::Adam opt(m.autoencoder_params().vars(), {cfg.ae_lr, 0.9, 0.999, 1e-8});
    for (int e = 0; e < cfg.ae_epochs; ++e) {
      double total = 0.0;
      int count = 0;
      for (const auto& idx : epoch_batches()) {
        Var x = Var::constant(batch_tensor(idx));
        Var loss = ag::mean(ag::square(ag::sub(m.decode(m.encode(x)), x)));
        if (!std::isfinite(loss.item())) fail(Errc::numeric_failure, "autoencoder pretraining diverged");
        opt.step(ag::grad(loss, m.autoencoder_params().vars()));
        total += loss.item();
        ++count;
      }
      r.history.ae_loss.push_back(count ? total / count : 0.0);
      spdlog::info("autoencoder epoch {}/{} mse {:.6f}", e + 1, cfg.ae_epochs, r.history.ae_loss.back());
    }
    // Unit-variance latents for the diffusion process.
    m.set_latent_scale(1.0);
    double sq = 0.0, mean = 0.0;
    std::size_t n = 0;
    for (const auto& z : m.encode_specs(specs)) {
      mean += z.sum();
      sq += z.squaredNorm();
      n += static_cast<std::size_t>(z.size());
    }
    mean /= static_cast<double>(n);
    const double sd = std::sqrt(std::max(sq / static_cast<double>(n) - mean * mean, 1e-12));
    m.set_latent_scale(1.0 / sd);
    const auto errs = ae_errors(m, specs);
    m.set_ae_floor(std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(errs.size()));
    spdlog::info("latent scale {:.6g}, reconstruction floor {:.6g}", m.latent_scale(), m.ae_floor());
  }

  // Fixed probe: first probe_size clips, steps and noise from a dedicated stream.
  double probe_noise() {
    const LdganModel& m = r.model;
    ag::NoGradGuard ng;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < std::min<std::size_t>(specs.size(), static_cast<std::size_t>(cfg.probe_size)); ++i)
      idx.push_back(i);
    std::mt19937_64 prng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<int> td(1, m.config().n_steps);
    std::vector<int> t(idx.size());
    for (int& v : t) v = td(prng);
    Var z0 = m.encode(Var::constant(batch_tensor(idx)));
    Tensor eps = normal_tensor(z0.shape(), prng);
    return noise_loss(m.denoise(m.q_sample(z0, t, eps), t), eps).item();
  }

  void snapshot_and_abort(const StepStats& s) {
    std::filesystem::path dir = cfg.diagnostics_dir;
    if (dir.empty() && !cfg.metrics_log.empty()) dir = cfg.metrics_log.parent_path();
    std::string where = "(no diagnostics directory configured)";
    if (!dir.empty()) {
      std::filesystem::create_directories(dir);
      Archive a;
      save_training(a, r, cfg);
      const auto path = dir / ("nan_step" + std::to_string(s.step) + ".ckpt");
      write_archive(path, a);
      where = path.string();
    }
    char buf[256];
    std::snprintf(buf, sizeof(buf), "non-finite loss at step %lld (L_noise=%g L_stat=%g L_adv=%g L_GP=%g); snapshot: ",
                  static_cast<long long>(s.step), s.l_noise, s.l_stat, s.l_adv, s.l_gp);
    fail(Errc::numeric_failure, buf + where);
  }

  StepStats step(const std::vector<std::size_t>& idx, int epoch) {
    LdganModel& m = r.model;
    const LdganConfig& mc = m.config();
    const int b = static_cast<int>(idx.size());
    const int d = mc.d_z;
    const int t0 = mc.t0();
    StepStats st;
    st.step = r.steps_done + 1;
    st.epoch = epoch;

    Tensor x = batch_tensor(idx);
    Var xc = Var::constant(x);

    // Generator inputs with temporal mixup.
    Var xin = xc;
    if (cfg.tmixup.enabled) {
      TMixupDraw draw;
      draw.tau = sample_tau(cfg.tmixup, rng);
      for (int i = 0; i < b; ++i) draw.lambda.push_back(sample_lambda(cfg.tmixup, rng));
      xin = tmixup_batch(xc, minmax_per_sample(x), m.tmixup_params(), cfg.tmixup.power_p, draw);
    }
    Var z0 = m.encode(xin);

    std::uniform_int_distribution<int> td(1, mc.n_steps);
    std::vector<int> t(static_cast<std::size_t>(b));
    for (int& v : t) v = td(rng);
    Tensor eps = normal_tensor({b, d}, rng);
    Var l_noise = noise_loss(m.denoise(m.q_sample(z0, t, eps), t), eps);

    // Final and intermediate reconstructions.
    const int t0c = std::max(t0, 1);
    Tensor eps2 = normal_tensor({b, d}, rng);
    Var fake_final = m.decode(m.reverse_chain(m.q_sample(z0, std::vector<int>(static_cast<std::size_t>(b), t0c), eps2), t0c));
    const int ti = std::uniform_int_distribution<int>(1, t0c)(rng);
    Tensor eps3 = normal_tensor({b, d}, rng);
    const std::vector<int> tiv(static_cast<std::size_t>(b), ti);
    const std::vector<int> tprev(static_cast<std::size_t>(b), ti - 1);
    const std::vector<int> zeros(static_cast<std::size_t>(b), 0);
    Var fake_int = m.decode(m.reverse_step(m.q_sample(z0, tiv, eps3), tiv));

    Tensor real_int;
    Var real_feats_all;
    {
      ag::NoGradGuard ng;
      Var z_real = m.encode(xc);
      real_int = m.decode(m.q_sample(z_real, tprev, eps3)).value();
      std::vector<int> tt = zeros;
      tt.insert(tt.end(), tprev.begin(), tprev.end());
      real_feats_all = m.discriminate(Var::constant(concat_batches({&x, &real_int})), tt).feats;
    }
    std::vector<int> tf = zeros;
    tf.insert(tf.end(), tprev.begin(), tprev.end());
    Var fake_feats_all = m.discriminate(ag::concat({fake_final, fake_int}, 0), tf).feats;
    Var l_stat = ag::scale(ag::add(stat_loss(ag::slice(real_feats_all, 0, 0, b), ag::slice(fake_feats_all, 0, 0, b)),
                                   stat_loss(ag::slice(real_feats_all, 0, b, b), ag::slice(fake_feats_all, 0, b, b))),
                           0.5);
    Var l_g = generator_loss(l_noise, l_stat, cfg.lambda_stat);
    st.l_noise = l_noise.item();
    st.l_stat = l_stat.item();
    st.l_g = l_g.item();
    if (!std::isfinite(st.l_g)) snapshot_and_abort(st);
    const auto g_params = concat_params(m.denoiser_params(), m.mixup_params());
    r.g_opt.step(ag::grad(l_g, g_params));

    // Discriminator update on detached samples.
    Tensor ff = fake_final.value();
    Tensor fi = fake_int.value();
    std::vector<int> td_all = zeros;
    td_all.insert(td_all.end(), tprev.begin(), tprev.end());
    td_all.insert(td_all.end(), zeros.begin(), zeros.end());
    td_all.insert(td_all.end(), tprev.begin(), tprev.end());
    Var logits = m.discriminate(Var::constant(concat_batches({&x, &real_int, &ff, &fi})), td_all).logits;
    Var l_adv = adversarial_loss(ag::slice(logits, 0, 0, 2 * b), ag::slice(logits, 0, 2 * b, b), ag::slice(logits, 0, 3 * b, b));
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::vector<double> u(static_cast<std::size_t>(b));
    for (double& v : u) v = ud(rng);
    Var l_gp = gradient_penalty([&](const Var& xh) { return m.discriminate(xh, zeros).logits; }, x, ff, u);
    Var l_d = discriminator_loss(l_adv, l_gp, cfg.lambda_gp);
    st.l_adv = l_adv.item();
    st.l_gp = l_gp.item();
    st.l_d = l_d.item();
    if (!finite(st)) snapshot_and_abort(st);
    r.d_opt.step(ag::grad(l_d, m.discriminator_params().vars()));
    m.refresh_spectral_norms();
    ++r.steps_done;
    return st;
  }
};

}  // namespace

TrainResult train(const std::vector<Eigen::MatrixXd>& specs, const LdganConfig& model_cfg, const TrainConfig& cfg,
                  const TrainHooks& hooks, const Archive* resume) {
  cfg.validate();
  if (specs.empty()) fail(Errc::invalid_input, "train: empty train split");
  for (const auto& s : specs)
    for (double v : s.reshaped())
      if (!std::isfinite(v)) fail(Errc::invalid_input, "train: non-finite spectrogram entry");

  TrainResult r;
  std::mt19937_64 rng(cfg.seed);
  if (resume) {
    r.model = LdganModel::load(*resume);
    r.epochs_done = static_cast<int>(resume->get_scalar("train/epochs_done"));
    r.steps_done = static_cast<std::int64_t>(resume->get_scalar("train/steps_done"));
    std::istringstream is(resume->meta("train.rng"));
    is >> rng;
    if (resume->has("train/probe_noise")) {
      const Tensor& p = resume->get("train/probe_noise");
      r.history.probe_noise.assign(p.vec().begin(), p.vec().end());
    }
    if (resume->has("train/ae_loss")) {
      const Tensor& p = resume->get("train/ae_loss");
      r.history.ae_loss.assign(p.vec().begin(), p.vec().end());
    }
    spdlog::info("resuming after epoch {} (step {})", r.epochs_done, r.steps_done);
  } else {
    r.model = LdganModel(model_cfg, cfg.seed ^ 0x5851f42d4c957f2dULL);
    double lo = specs.front().minCoeff(), hi = specs.front().maxCoeff();
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(specs.front().rows(), specs.front().cols());
    for (const auto& s : specs) {
      if (s.rows() != model_cfg.n_mels || s.cols() != model_cfg.n_frames)
        fail(Errc::invalid_input, "train: spectrogram geometry does not match the model config");
      lo = std::min(lo, s.minCoeff());
      hi = std::max(hi, s.maxCoeff());
      avg += s;
    }
    r.model.set_domain(lo, hi > lo ? hi : lo + 1.0);
    r.model.set_train_average(avg / static_cast<double>(specs.size()));
  }

  const nn::AdamConfig gcfg{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, 1e-8};
  const nn::AdamConfig dcfg{cfg.disc_lr, cfg.adam_beta1, cfg.adam_beta2, 1e-8};
  r.g_opt = nn::Adam(concat_params(r.model.denoiser_params(), r.model.mixup_params()), gcfg);
  r.d_opt = nn::Adam(r.model.discriminator_params().vars(), dcfg);
  if (resume) {
    load_adam(*resume, "opt/g", r.g_opt);
    load_adam(*resume, "opt/d", r.d_opt);
  }

  Trainer t{specs, cfg, hooks, r, std::move(rng), MetricsLog(cfg.metrics_log, resume != nullptr)};
  if (!resume) {
    t.pretrain_autoencoder();
    r.history.probe_noise.push_back(t.probe_noise());
  }
  for (int e = r.epochs_done + 1; e <= cfg.epochs; ++e) {
    double ln = 0.0, ld = 0.0;
    int n = 0;
    for (const auto& idx : t.epoch_batches()) {
      StepStats st = t.step(idx, e);
      t.log.write(st);
      r.history.steps.push_back(st);
      if (hooks.on_step) hooks.on_step(st, r.model);
      ln += st.l_noise;
      ld += st.l_d;
      ++n;
    }
    r.epochs_done = e;
    r.history.probe_noise.push_back(t.probe_noise());
    spdlog::info("epoch {}/{} L_noise {:.5f} L_D {:.5f} probe {:.5f}", e, cfg.epochs, ln / std::max(n, 1),
                 ld / std::max(n, 1), r.history.probe_noise.back());
    if (hooks.on_epoch) hooks.on_epoch(e, r.model);
  }
  r.model.set_trained(true);
  std::ostringstream os;
  os << t.rng;
  r.rng_state = os.str();
  return r;
}

void save_training(Archive& a, const TrainResult& r, const TrainConfig& cfg) {
  r.model.save(a);
  save_adam(a, "opt/g", r.g_opt);
  save_adam(a, "opt/d", r.d_opt);
  a.put_scalar("train/epochs_done", r.epochs_done);
  a.put_scalar("train/steps_done", static_cast<double>(r.steps_done));
  a.put("train/probe_noise", Tensor({static_cast<int>(r.history.probe_noise.size())}, r.history.probe_noise));
  a.put("train/ae_loss", Tensor({static_cast<int>(r.history.ae_loss.size())}, r.history.ae_loss));
  a.set_meta("train.config", train_config_json(cfg));
  a.set_meta("train.rng", r.rng_state);
  a.put_scalar("train/seed", static_cast<double>(cfg.seed));
}

}  // namespace tldg
