// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

// Latent diffusion GAN: a convolutional spectrogram autoencoder, an MLP noise
// predictor in its latent space and a spectrally normalized, timestep
// conditioned discriminator. Losses are free functions so they can be
// exercised with stub networks.

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tldg/autograd.hpp"
#include "tldg/checkpoint.hpp"
#include "tldg/diffusion.hpp"
#include "tldg/nn.hpp"
#include "tldg/tmixup.hpp"

namespace tldg {

struct LdganConfig {
  int n_mels = 128;
  int n_frames = 313;
  int d_z = 64;
  std::vector<int> enc_channels = {8, 16, 32, 32};
  std::vector<int> disc_channels = {8, 16, 32, 32};
  int denoiser_hidden = 256;
  int time_embed_dim = 32;
  int disc_time_planes = 4;
  double leaky_slope = 0.2;
  int n_steps = 50;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double t0_fraction = 0.3;
  int time_margin = 8;  // frames of edge padding on each side

  int t0() const;
  int down_factor() const;  // 2^depth
  int padded_mels() const;
  int padded_frames() const;
  void validate() const;
};

enum class LatentSource { reencoded, denoised };
std::string_view to_string(LatentSource s);
LatentSource parse_latent_source(std::string_view s);

struct DiscOutput {
  ag::Var logits;  // [N, 1]
  ag::Var feats;   // [N, C] penultimate features
};

struct Reconstruction {
  Eigen::MatrixXd spec;        // log-mel domain, same geometry as the input
  Eigen::VectorXd z_real;      // encode(input)
  Eigen::VectorXd z_denoised;  // end of the reverse chain
  Eigen::VectorXd z_reencoded;  // encode(spec)

  const Eigen::VectorXd& z_rec(LatentSource s) const {
    return s == LatentSource::denoised ? z_denoised : z_reencoded;
  }
};

class LdganModel {
 public:
  LdganModel() = default;
  LdganModel(const LdganConfig& cfg, std::uint64_t seed);

  const LdganConfig& config() const { return cfg_; }
  const DiffusionSchedule& schedule() const { return schedule_; }

  // Networks. Spectrogram tensors are [N, 1, F, T] in the model domain.
  ag::Var encode(const ag::Var& x) const;  // -> [N, d_z], scaled latent
  ag::Var decode(const ag::Var& z) const;  // -> [N, 1, F, T]
  ag::Var denoise(const ag::Var& z_t, const std::vector<int>& t) const;  // predicted noise
  DiscOutput discriminate(const ag::Var& x, const std::vector<int>& t) const;

  // z_t for per-sample steps (t = 0 returns z0).
  ag::Var q_sample(const ag::Var& z0, const std::vector<int>& t, const ag::Tensor& eps) const;
  // One deterministic reverse step per sample, t >= 1.
  ag::Var reverse_step(const ag::Var& z_t, const std::vector<int>& t) const;
  // Reverse chain from step t0 down to 0 for the whole batch.
  ag::Var reverse_chain(const ag::Var& z_t0, int t0) const;

  // Model-domain mapping: (x - lo) / (hi - lo).
  void set_domain(double lo, double hi);
  double domain_lo() const { return lo_; }
  double domain_hi() const { return hi_; }
  ag::Tensor to_model(const std::vector<const Eigen::MatrixXd*>& specs) const;
  Eigen::MatrixXd from_model(const ag::Tensor& batch, int index) const;

  void set_latent_scale(double s) { latent_scale_ = s; }
  double latent_scale() const { return latent_scale_; }

  // Deterministic given (weights, inputs, seeds). t0 < 0 uses the config.
  std::vector<Reconstruction> reconstruct(const std::vector<Eigen::MatrixXd>& specs,
                                          const std::vector<std::uint64_t>& noise_seeds,
                                          int t0 = -1) const;
  std::vector<Eigen::VectorXd> encode_specs(const std::vector<Eigen::MatrixXd>& specs) const;

  nn::ParamTable& autoencoder_params() { return ae_; }
  nn::ParamTable& denoiser_params() { return den_; }
  nn::ParamTable& discriminator_params() { return disc_; }
  nn::ParamTable& mixup_params() { return mix_; }
  const nn::ParamTable& autoencoder_params() const { return ae_; }
  const nn::ParamTable& denoiser_params() const { return den_; }
  const nn::ParamTable& discriminator_params() const { return disc_; }
  const nn::ParamTable& mixup_params() const { return mix_; }
  TMixupParams tmixup_params() const { return {mix_.get("mix.logits"), mix_.get("mix.a"), mix_.get("mix.b")}; }

  std::vector<nn::SpectralNorm>& spectral_norms() { return sn_; }
  const std::vector<nn::SpectralNorm>& spectral_norms() const { return sn_; }
  void refresh_spectral_norms();

  bool trained() const { return trained_; }
  void set_trained(bool t) { trained_ = t; }
  double ae_floor() const { return ae_floor_; }
  void set_ae_floor(double f) { ae_floor_ = f; }
  const Eigen::MatrixXd& train_average() const { return train_average_; }
  void set_train_average(Eigen::MatrixXd m) { train_average_ = std::move(m); }

  void save(Archive& a) const;
  static LdganModel load(const Archive& a);

 private:
  void check_geometry(const ag::Var& x) const;
  ag::Var pad_input(const ag::Var& x) const;

  LdganConfig cfg_;
  DiffusionSchedule schedule_;
  nn::ParamTable ae_;
  nn::ParamTable den_;
  nn::ParamTable disc_;
  nn::ParamTable mix_;

  std::vector<nn::Conv2d> enc_convs_;
  nn::Linear enc_fc_;
  nn::Linear dec_fc_;
  std::vector<nn::ConvTranspose2d> dec_convs_;
  std::vector<nn::Linear> den_layers_;
  std::vector<nn::Conv2d> disc_convs_;
  nn::Linear disc_fc_;
  std::vector<nn::SpectralNorm> sn_;  // disc convs, then disc_fc

  double lo_ = 0.0;
  double hi_ = 1.0;
  double latent_scale_ = 1.0;
  double ae_floor_ = 0.0;
  bool trained_ = false;
  Eigen::MatrixXd train_average_;
};

// ---------------------------------------------------------------------------
// Losses.

// Mean over the batch of ||eps_hat - eps||^2.
ag::Var noise_loss(const ag::Var& eps_hat, const ag::Tensor& eps);
// ||mean_batch(real) - mean_batch(fake)||^2.
ag::Var stat_loss(const ag::Var& real_feats, const ag::Var& fake_feats);
ag::Var generator_loss(const ag::Var& l_noise, const ag::Var& l_stat, double lambda_stat);

using Critic = std::function<ag::Var(const ag::Var&)>;  // [N, ...] -> [N, 1] or [N]
// Mean over the batch of (||grad_x D(x_hat)||_2 - 1)^2 with
// x_hat = u * real + (1 - u) * fake. Differentiable in the critic's parameters.
ag::Var gradient_penalty(const Critic& critic, const ag::Tensor& real, const ag::Tensor& fake,
                         const std::vector<double>& u);
// Non-saturating logistic loss: mean softplus(-real) + (mean softplus(fake_final)
// + mean softplus(fake_int)) / 2.
ag::Var adversarial_loss(const ag::Var& real_logits, const ag::Var& fake_final_logits,
                         const ag::Var& fake_int_logits);
ag::Var discriminator_loss(const ag::Var& l_adv, const ag::Var& l_gp, double lambda_gp);

}  // namespace tldg
