// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tldg/checkpoint.hpp"
#include "tldg/ldgan.hpp"
#include "tldg/nn.hpp"
#include "tldg/tmixup.hpp"

namespace tldg {

struct TrainConfig {
  int epochs = 20;
  int batch = 16;
  double lr = 1e-3;
  double disc_lr = 1e-3;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int ae_epochs = 10;
  double ae_lr = 1e-3;
  double lambda_stat = 1.0;
  double lambda_gp = 10.0;
  TMixupConfig tmixup;
  std::uint64_t seed = 0;
  int probe_size = 16;
  std::filesystem::path metrics_log;     // tab separated, one line per step; empty disables
  std::filesystem::path diagnostics_dir;  // NaN snapshots; empty uses the metrics log directory

  void validate() const;
};

struct StepStats {
  std::int64_t step = 0;
  int epoch = 0;
  double l_noise = 0.0;
  double l_stat = 0.0;
  double l_g = 0.0;
  double l_adv = 0.0;
  double l_gp = 0.0;
  double l_d = 0.0;
};

struct TrainHistory {
  std::vector<double> ae_loss;      // per pretraining epoch
  std::vector<double> probe_noise;  // fixed probe batch; index 0 is before the first epoch
  std::vector<StepStats> steps;
};

struct TrainHooks {
  std::function<void(const StepStats&, const LdganModel&)> on_step;  // after the discriminator update
  std::function<void(int epoch, const LdganModel&)> on_epoch;
};

struct TrainResult {
  LdganModel model;
  TrainHistory history;
  int epochs_done = 0;
  std::int64_t steps_done = 0;
  nn::Adam g_opt;
  nn::Adam d_opt;
  std::string rng_state;
};

// Trains on raw log-mel spectrograms of the train split. With `resume`, the
// state stored by save_training continues from its epoch counter.
TrainResult train(const std::vector<Eigen::MatrixXd>& specs, const LdganConfig& model_cfg,
                  const TrainConfig& cfg, const TrainHooks& hooks = {}, const Archive* resume = nullptr);

// Model, optimizer moments, counters, RNG state and a config echo.
void save_training(Archive& a, const TrainResult& r, const TrainConfig& cfg);

std::string train_config_json(const TrainConfig& cfg);

// Per-sample min-max normalization of a [N, 1, F, T] batch to [N, F, T].
ag::Tensor minmax_per_sample(const ag::Tensor& batch);

}  // namespace tldg
