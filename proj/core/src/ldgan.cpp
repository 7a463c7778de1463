// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/ldgan.hpp"

#include <cmath>

#include <json.hpp>

#include "tldg/error.hpp"
#include "tldg/ops.hpp"

namespace tldg {

using ag::Tensor;
using ag::Var;

namespace {

constexpr ag::ConvGeom kDown{4, 4, 2, 1};

int round_up(int v, int m) { return (v + m - 1) / m * m; }

nlohmann::json config_json(const LdganConfig& c) {
  return {{"n_mels", c.n_mels},
          {"n_frames", c.n_frames},
          {"d_z", c.d_z},
          {"enc_channels", c.enc_channels},
          {"disc_channels", c.disc_channels},
          {"denoiser_hidden", c.denoiser_hidden},
          {"time_embed_dim", c.time_embed_dim},
          {"disc_time_planes", c.disc_time_planes},
          {"leaky_slope", c.leaky_slope},
          {"n_steps", c.n_steps},
          {"beta_start", c.beta_start},
          {"beta_end", c.beta_end},
          {"t0_fraction", c.t0_fraction},
          {"time_margin", c.time_margin}};
}

LdganConfig config_from_json(const nlohmann::json& j) {
  LdganConfig c;
  c.n_mels = j.at("n_mels");
  c.n_frames = j.at("n_frames");
  c.d_z = j.at("d_z");
  c.enc_channels = j.at("enc_channels").get<std::vector<int>>();
  c.disc_channels = j.at("disc_channels").get<std::vector<int>>();
  c.denoiser_hidden = j.at("denoiser_hidden");
  c.time_embed_dim = j.at("time_embed_dim");
  c.disc_time_planes = j.at("disc_time_planes");
  c.leaky_slope = j.at("leaky_slope");
  c.n_steps = j.at("n_steps");
  c.beta_start = j.at("beta_start");
  c.beta_end = j.at("beta_end");
  c.t0_fraction = j.at("t0_fraction");
  c.time_margin = j.value("time_margin", 0);
  return c;
}

}  // namespace

int LdganConfig::t0() const { return static_cast<int>(std::lround(t0_fraction * n_steps)); }
int LdganConfig::down_factor() const { return 1 << enc_channels.size(); }
int LdganConfig::padded_mels() const { return round_up(n_mels, down_factor()); }
int LdganConfig::padded_frames() const { return round_up(n_frames + 2 * time_margin, down_factor()); }

void LdganConfig::validate() const {
  if (n_mels < 1 || n_frames < 1) fail(Errc::invalid_config, "ldgan: empty spectrogram geometry");
  if (d_z < 1) fail(Errc::invalid_config, "ldgan: d_z must be positive");
  if (time_margin < 0) fail(Errc::invalid_config, "ldgan: time_margin must be >= 0");
  if (enc_channels.empty() || disc_channels.size() < 2)
    fail(Errc::invalid_config, "ldgan: need at least one encoder and two discriminator stages");
  if (enc_channels.size() > 6 || disc_channels.size() > 6) fail(Errc::invalid_config, "ldgan: network too deep");
  if (time_embed_dim < 2 || time_embed_dim % 2 || disc_time_planes < 0 || disc_time_planes % 2)
    fail(Errc::invalid_config, "ldgan: embedding sizes must be even");
  if (!(t0_fraction >= 0.0 && t0_fraction <= 1.0)) fail(Errc::invalid_config, "ldgan: t0_fraction outside [0, 1]");
  if (padded_mels() / (1 << disc_channels.size()) < 1 || padded_frames() / (1 << disc_channels.size()) < 1)
    fail(Errc::invalid_config, "ldgan: spectrogram too small for the discriminator depth");
}

std::string_view to_string(LatentSource s) { return s == LatentSource::denoised ? "denoised" : "reencoded"; }

LatentSource parse_latent_source(std::string_view s) {
  if (s == "reencoded") return LatentSource::reencoded;
  if (s == "denoised") return LatentSource::denoised;
  fail(Errc::invalid_config, "unknown latent source '" + std::string(s) + "'");
}

LdganModel::LdganModel(const LdganConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  schedule_ = DiffusionSchedule::linear(cfg_.n_steps, cfg_.beta_start, cfg_.beta_end);
  nn::Rng rng(seed);
  const double lrelu_gain = std::sqrt(2.0 / (1.0 + cfg_.leaky_slope * cfg_.leaky_slope));

  int c_in = 1;
  for (std::size_t i = 0; i < cfg_.enc_channels.size(); ++i) {
    enc_convs_.emplace_back(ae_, "enc.conv" + std::to_string(i), c_in, cfg_.enc_channels[i], kDown, rng, lrelu_gain);
    c_in = cfg_.enc_channels[i];
  }
  const int bh = cfg_.padded_mels() / cfg_.down_factor();
  const int bw = cfg_.padded_frames() / cfg_.down_factor();
  const int flat = c_in * bh * bw;
  enc_fc_ = nn::Linear(ae_, "enc.fc", flat, cfg_.d_z, rng);
  dec_fc_ = nn::Linear(ae_, "dec.fc", cfg_.d_z, flat, rng, lrelu_gain);
  for (std::size_t i = cfg_.enc_channels.size(); i-- > 0;) {
    const int out = i == 0 ? 1 : cfg_.enc_channels[i - 1];
    dec_convs_.emplace_back(ae_, "dec.conv" + std::to_string(cfg_.enc_channels.size() - 1 - i),
                            cfg_.enc_channels[i], out, kDown, rng, i == 0 ? 1.0 : lrelu_gain);
  }

  const int din = cfg_.d_z + cfg_.time_embed_dim;
  den_layers_.emplace_back(den_, "den.fc0", din, cfg_.denoiser_hidden, rng, std::sqrt(2.0));
  den_layers_.emplace_back(den_, "den.fc1", cfg_.denoiser_hidden, cfg_.denoiser_hidden, rng, std::sqrt(2.0));
  den_layers_.emplace_back(den_, "den.fc2", cfg_.denoiser_hidden, cfg_.d_z, rng);

  c_in = 1;
  for (std::size_t i = 0; i < cfg_.disc_channels.size(); ++i) {
    const int in = i == 1 ? c_in + cfg_.disc_time_planes : c_in;
    disc_convs_.emplace_back(disc_, "disc.conv" + std::to_string(i), in, cfg_.disc_channels[i], kDown, rng, lrelu_gain);
    c_in = cfg_.disc_channels[i];
  }
  disc_fc_ = nn::Linear(disc_, "disc.fc", c_in, 1, rng);
  for (const auto& c : disc_convs_) sn_.emplace_back(c.w, c.w.value().dim(0), rng);
  sn_.emplace_back(disc_fc_.w, disc_fc_.in, rng);

  mix_.add("mix.logits", Tensor({3}, 0.0));
  mix_.add("mix.a", Tensor::scalar(1.0));
  mix_.add("mix.b", Tensor::scalar(0.0));
  train_average_ = Eigen::MatrixXd::Zero(cfg_.n_mels, cfg_.n_frames);
}

void LdganModel::check_geometry(const Var& x) const {
  const Tensor& v = x.value();
  if (v.rank() != 4 || v.dim(1) != 1 || v.dim(2) != cfg_.n_mels || v.dim(3) != cfg_.n_frames)
    fail(Errc::invalid_input, "spectrogram batch " + ag::shape_str(v.shape()) + " does not match the model geometry [N,1," +
                                  std::to_string(cfg_.n_mels) + "," + std::to_string(cfg_.n_frames) + "]");
}

namespace {
// Edge frames repeated `n` times, [N, C, F, n].
Var repeat_frame(const Var& x, int frame, int n) {
  const Tensor& v = x.value();
  Var col = ag::reshape(ag::slice(x, 3, frame, 1), {v.dim(0), v.dim(1), v.dim(2)});
  return ag::axis_broadcast(col, 3, n);
}
}  // namespace

// The first and last frames are repeated into the time margins so the
// convolutions' zero padding never touches real frames; the mel axis is
// zero-padded.
Var LdganModel::pad_input(const Var& x) const {
  const int t = cfg_.n_frames, tp = cfg_.padded_frames();
  Var y = x;
  if (tp != t) {
    const int left = cfg_.time_margin, right = tp - t - left;
    std::vector<Var> parts;
    if (left > 0) parts.push_back(repeat_frame(x, 0, left));
    parts.push_back(x);
    if (right > 0) parts.push_back(repeat_frame(x, t - 1, right));
    y = ag::concat(parts, 3);
  }
  if (y.value().dim(2) != cfg_.padded_mels()) y = ag::embed(y, 2, 0, cfg_.padded_mels());
  return y;
}

Var LdganModel::encode(const Var& x) const {
  check_geometry(x);
  const int n = x.value().dim(0);
  Var h = pad_input(x);
  for (const auto& c : enc_convs_) h = ag::leaky_relu(c(h), cfg_.leaky_slope);
  h = ag::reshape(h, {n, static_cast<int>(h.size()) / n});
  return ag::scale(enc_fc_(h), latent_scale_);
}

Var LdganModel::decode(const Var& z) const {
  if (z.value().rank() != 2 || z.value().dim(1) != cfg_.d_z)
    fail(Errc::invalid_input, "decode: latent batch " + ag::shape_str(z.shape()) + " does not have d_z = " +
                                  std::to_string(cfg_.d_z));
  const int n = z.value().dim(0);
  Var h = ag::leaky_relu(dec_fc_(ag::scale(z, 1.0 / latent_scale_)), cfg_.leaky_slope);
  h = ag::reshape(h, {n, cfg_.enc_channels.back(), cfg_.padded_mels() / cfg_.down_factor(),
                      cfg_.padded_frames() / cfg_.down_factor()});
  for (std::size_t i = 0; i < dec_convs_.size(); ++i) {
    h = dec_convs_[i](h);
    if (i + 1 < dec_convs_.size()) h = ag::leaky_relu(h, cfg_.leaky_slope);
  }
  if (h.value().dim(2) != cfg_.n_mels) h = ag::slice(h, 2, 0, cfg_.n_mels);
  if (h.value().dim(3) != cfg_.n_frames) h = ag::slice(h, 3, cfg_.time_margin, cfg_.n_frames);
  return h;
}

Var LdganModel::denoise(const Var& z_t, const std::vector<int>& t) const {
  if (z_t.value().rank() != 2 || z_t.value().dim(1) != cfg_.d_z || z_t.value().dim(0) != static_cast<int>(t.size()))
    fail(Errc::invalid_input, "denoise: latent batch / step count mismatch");
  Var h = ag::concat({z_t, Var::constant(nn::timestep_embedding(t, cfg_.time_embed_dim))}, 1);
  h = ag::silu(den_layers_[0](h));
  h = ag::silu(den_layers_[1](h));
  return den_layers_[2](h);
}

DiscOutput LdganModel::discriminate(const Var& x, const std::vector<int>& t) const {
  check_geometry(x);
  const int n = x.value().dim(0);
  if (static_cast<int>(t.size()) != n) fail(Errc::invalid_input, "discriminate: one step per sample");
  Var h = pad_input(x);
  for (std::size_t i = 0; i < disc_convs_.size(); ++i) {
    h = ag::leaky_relu(disc_convs_[i].forward(h, sn_[i].normalized()), cfg_.leaky_slope);
    if (i == 0 && cfg_.disc_time_planes > 0) {
      Var planes = ag::spatial_broadcast(Var::constant(nn::timestep_embedding(t, cfg_.disc_time_planes)),
                                         h.value().dim(2), h.value().dim(3));
      h = ag::concat({h, planes}, 1);
    }
  }
  const double inv_hw = 1.0 / (h.value().dim(2) * h.value().dim(3));
  Var feats = ag::scale(ag::spatial_sum(h), inv_hw);
  Var logits = disc_fc_.forward(feats, sn_.back().normalized());
  return {logits, feats};
}

Var LdganModel::q_sample(const Var& z0, const std::vector<int>& t, const Tensor& eps) const {
  const int n = z0.value().dim(0), d = z0.value().dim(1);
  if (static_cast<int>(t.size()) != n || eps.shape() != z0.shape())
    fail(Errc::invalid_input, "q_sample: batch shape mismatch");
  Tensor a(z0.shape()), be(z0.shape());
  for (int s = 0; s < n; ++s) {
    const int ts = t[static_cast<std::size_t>(s)];
    if (ts < 0 || ts > cfg_.n_steps) fail(Errc::invalid_input, "q_sample: step out of range");
    const double ab = schedule_.alpha_bar(ts);
    for (int j = 0; j < d; ++j) {
      const std::size_t i = static_cast<std::size_t>(s) * d + j;
      a[i] = std::sqrt(ab);
      be[i] = std::sqrt(1.0 - ab) * eps[i];
    }
  }
  return ag::add_const(ag::mul_const(z0, a), be);
}

Var LdganModel::reverse_step(const Var& z_t, const std::vector<int>& t) const {
  const int n = z_t.value().dim(0), d = z_t.value().dim(1);
  Var eps_hat = denoise(z_t, t);
  Tensor cz(z_t.shape()), ce(z_t.shape());
  for (int s = 0; s < n; ++s) {
    const ReverseCoeffs c = reverse_coeffs(schedule_, t[static_cast<std::size_t>(s)]);
    for (int j = 0; j < d; ++j) {
      cz[static_cast<std::size_t>(s) * d + j] = c.c_z;
      ce[static_cast<std::size_t>(s) * d + j] = c.c_eps;
    }
  }
  return ag::sub(ag::mul_const(z_t, cz), ag::mul_const(eps_hat, ce));
}

Var LdganModel::reverse_chain(const Var& z_t0, int t0) const {
  Var z = z_t0;
  const auto n = static_cast<std::size_t>(z_t0.value().dim(0));
  for (int t = t0; t >= 1; --t) z = reverse_step(z, std::vector<int>(n, t));
  return z;
}

void LdganModel::set_domain(double lo, double hi) {
  if (!(hi > lo)) fail(Errc::invalid_input, "model domain needs hi > lo");
  lo_ = lo;
  hi_ = hi;
}

Tensor LdganModel::to_model(const std::vector<const Eigen::MatrixXd*>& specs) const {
  const int f = cfg_.n_mels, t = cfg_.n_frames;
  Tensor out({static_cast<int>(specs.size()), 1, f, t});
  const double inv = 1.0 / (hi_ - lo_);
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const Eigen::MatrixXd& m = *specs[s];
    if (m.rows() != f || m.cols() != t)
      fail(Errc::invalid_input, "spectrogram " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                    " does not match the model geometry " + std::to_string(f) + "x" + std::to_string(t));
    double* p = out.data() + s * static_cast<std::size_t>(f) * t;
    for (int i = 0; i < f; ++i)
      for (int j = 0; j < t; ++j) p[static_cast<std::size_t>(i) * t + j] = (m(i, j) - lo_) * inv;
  }
  return out;
}

Eigen::MatrixXd LdganModel::from_model(const Tensor& batch, int index) const {
  const int f = cfg_.n_mels, t = cfg_.n_frames;
  Eigen::MatrixXd m(f, t);
  const double* p = batch.data() + static_cast<std::size_t>(index) * f * t;
  for (int i = 0; i < f; ++i)
    for (int j = 0; j < t; ++j) m(i, j) = p[static_cast<std::size_t>(i) * t + j] * (hi_ - lo_) + lo_;
  return m;
}

namespace {
constexpr std::size_t kInferenceBatch = 16;

Eigen::VectorXd row(const Tensor& t, int i) {
  const int d = t.dim(1);
  return Eigen::Map<const Eigen::VectorXd>(t.data() + static_cast<std::size_t>(i) * d, d);
}
}  // namespace

std::vector<Eigen::VectorXd> LdganModel::encode_specs(const std::vector<Eigen::MatrixXd>& specs) const {
  ag::NoGradGuard ng;
  std::vector<Eigen::VectorXd> out;
  for (std::size_t s0 = 0; s0 < specs.size(); s0 += kInferenceBatch) {
    std::vector<const Eigen::MatrixXd*> chunk;
    for (std::size_t s = s0; s < std::min(specs.size(), s0 + kInferenceBatch); ++s) chunk.push_back(&specs[s]);
    Var z = encode(Var::constant(to_model(chunk)));
    for (int i = 0; i < z.value().dim(0); ++i) out.push_back(row(z.value(), i));
  }
  return out;
}

std::vector<Reconstruction> LdganModel::reconstruct(const std::vector<Eigen::MatrixXd>& specs,
                                                    const std::vector<std::uint64_t>& noise_seeds,
                                                    int t0) const {
  if (!trained_) fail(Errc::invalid_state, "reconstruct called on an untrained model");
  if (noise_seeds.size() != specs.size()) fail(Errc::invalid_input, "reconstruct: one noise seed per spectrogram");
  if (t0 < 0) t0 = cfg_.t0();
  if (t0 > cfg_.n_steps) fail(Errc::invalid_input, "reconstruct: t0 beyond the schedule");
  ag::NoGradGuard ng;
  std::vector<Reconstruction> out;
  out.reserve(specs.size());
  for (std::size_t s0 = 0; s0 < specs.size(); s0 += kInferenceBatch) {
    const std::size_t s1 = std::min(specs.size(), s0 + kInferenceBatch);
    std::vector<const Eigen::MatrixXd*> chunk;
    for (std::size_t s = s0; s < s1; ++s) chunk.push_back(&specs[s]);
    const int n = static_cast<int>(chunk.size());
    Var z_real = encode(Var::constant(to_model(chunk)));
    Var z_hat = z_real;
    if (t0 > 0) {
      Tensor eps({n, cfg_.d_z});
      for (int i = 0; i < n; ++i) {
        std::mt19937_64 rng(noise_seeds[s0 + static_cast<std::size_t>(i)]);
        std::normal_distribution<double> nd;
        for (int j = 0; j < cfg_.d_z; ++j) eps[static_cast<std::size_t>(i) * cfg_.d_z + j] = nd(rng);
      }
      z_hat = reverse_chain(q_sample(z_real, std::vector<int>(static_cast<std::size_t>(n), t0), eps), t0);
    }
    Var rec = decode(z_hat);
    Var z_re = encode(rec);
    for (int i = 0; i < n; ++i) {
      Reconstruction r;
      r.spec = from_model(rec.value(), i);
      r.z_real = row(z_real.value(), i);
      r.z_denoised = row(z_hat.value(), i);
      r.z_reencoded = row(z_re.value(), i);
      out.push_back(std::move(r));
    }
  }
  return out;
}

void LdganModel::refresh_spectral_norms() {
  for (auto& s : sn_) s.refresh();
}

void LdganModel::save(Archive& a) const {
  a.set_meta("ldgan.config", config_json(cfg_).dump());
  for (const auto* table : {&ae_, &den_, &disc_, &mix_})
    for (const auto& [name, v] : table->items()) a.put("param/" + name, v.value());
  for (std::size_t i = 0; i < sn_.size(); ++i) {
    const std::string k = "sn/" + std::to_string(i);
    a.put_vector(k + "/u", sn_[i].u());
    a.put_vector(k + "/v", sn_[i].v());
    a.put_scalar(k + "/sigma", sn_[i].sigma());
  }
  a.put_scalar("model/domain_lo", lo_);
  a.put_scalar("model/domain_hi", hi_);
  a.put_scalar("model/latent_scale", latent_scale_);
  a.put_scalar("model/ae_floor", ae_floor_);
  a.put_scalar("model/trained", trained_ ? 1.0 : 0.0);
  a.put_matrix("model/train_average", train_average_);
}

LdganModel LdganModel::load(const Archive& a) {
  LdganConfig cfg;
  try {
    cfg = config_from_json(nlohmann::json::parse(a.meta("ldgan.config")));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::invalid_state, std::string("checkpoint model config unreadable: ") + e.what());
  }
  LdganModel m(cfg, 0);
  for (auto* table : {&m.ae_, &m.den_, &m.disc_, &m.mix_})
    for (auto& [name, v] : table->items()) {
      const Tensor& t = a.get("param/" + name);
      if (t.shape() != v.shape()) fail(Errc::invalid_state, "checkpoint parameter " + name + " has the wrong shape");
      Var(v).mutable_value() = t;
    }
  for (std::size_t i = 0; i < m.sn_.size(); ++i) {
    const std::string k = "sn/" + std::to_string(i);
    m.sn_[i].set_state(a.get_vector(k + "/u"), a.get_vector(k + "/v"), a.get_scalar(k + "/sigma"));
  }
  m.set_domain(a.get_scalar("model/domain_lo"), a.get_scalar("model/domain_hi"));
  m.latent_scale_ = a.get_scalar("model/latent_scale");
  m.ae_floor_ = a.get_scalar("model/ae_floor");
  m.trained_ = a.get_scalar("model/trained") != 0.0;
  m.train_average_ = a.get_matrix("model/train_average");
  return m;
}

// ---------------------------------------------------------------------------

Var noise_loss(const Var& eps_hat, const Tensor& eps) {
  if (eps_hat.shape() != eps.shape() || eps_hat.value().rank() != 2)
    fail(Errc::invalid_input, "noise_loss: prediction and noise shapes differ");
  Tensor neg_eps = eps;
  for (double& v : neg_eps.vec()) v = -v;
  return ag::scale(ag::sum(ag::square(ag::add_const(eps_hat, neg_eps))), 1.0 / eps.dim(0));
}

Var stat_loss(const Var& real_feats, const Var& fake_feats) {
  if (real_feats.value().rank() != 2 || fake_feats.value().rank() != 2 ||
      real_feats.value().dim(1) != fake_feats.value().dim(1))
    fail(Errc::invalid_input, "stat_loss: feature dimensions differ");
  Var mr = ag::scale(ag::axis_sum(real_feats, 0), 1.0 / real_feats.value().dim(0));
  Var mf = ag::scale(ag::axis_sum(fake_feats, 0), 1.0 / fake_feats.value().dim(0));
  return ag::sum(ag::square(ag::sub(mr, mf)));
}

Var generator_loss(const Var& l_noise, const Var& l_stat, double lambda_stat) {
  return ag::add(l_noise, ag::scale(l_stat, lambda_stat));
}

Var gradient_penalty(const Critic& critic, const Tensor& real, const Tensor& fake, const std::vector<double>& u) {
  if (real.shape() != fake.shape() || real.rank() < 2) fail(Errc::invalid_input, "gradient_penalty: batch shapes differ");
  const int n = real.dim(0);
  if (static_cast<int>(u.size()) != n) fail(Errc::invalid_input, "gradient_penalty: one weight per sample");
  const std::size_t per = real.size() / static_cast<std::size_t>(n);
  Tensor mix(real.shape());
  for (int s = 0; s < n; ++s)
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t k = static_cast<std::size_t>(s) * per + i;
      mix[k] = u[static_cast<std::size_t>(s)] * real[k] + (1.0 - u[static_cast<std::size_t>(s)]) * fake[k];
    }
  Var x_hat = Var::parameter(std::move(mix));
  ag::GradModeGuard on(true);
  Var out = critic(x_hat);
  Var g = ag::grad(ag::sum(out), {x_hat}, true)[0];
  Var norm = ag::safe_sqrt(ag::sample_sum(ag::square(g)));
  return ag::mean(ag::square(ag::add_scalar(norm, -1.0)));
}

Var adversarial_loss(const Var& real_logits, const Var& fake_final_logits, const Var& fake_int_logits) {
  Var real = ag::mean(ag::softplus(ag::neg(real_logits)));
  Var fake = ag::mean(ag::softplus(fake_final_logits));
  if (fake_int_logits.defined())
    fake = ag::scale(ag::add(fake, ag::mean(ag::softplus(fake_int_logits))), 0.5);
  return ag::add(real, fake);
}

Var discriminator_loss(const Var& l_adv, const Var& l_gp, double lambda_gp) {
  return ag::add(l_adv, ag::scale(l_gp, lambda_gp));
}

}  // namespace tldg
