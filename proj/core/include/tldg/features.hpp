// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "tldg/wav.hpp"

namespace tldg {

enum class Normalization { raw, minmax01, zscore };

struct FeatureConfig {
  int sample_rate_hz = 16000;
  int n_fft = 1024;
  int hop = 512;
  int n_mels = 128;
  double fmin_hz = 0.0;
  double fmax_hz = 8000.0;
  bool center = true;  // reflect-pad n_fft/2 on both sides
  double log_eps = 1e-10;
  double clip_duration_s = 10.0;  // waveforms are padded/truncated to this length first

  std::size_t clip_samples() const;
  int expected_frames() const;  // for a clip of clip_samples()
  std::string fingerprint() const;
};

/// F x T log-mel energies (natural log of mel power + eps).
struct LogMelSpec {
  Eigen::MatrixXd values;
  double frame_hop_s = 0.0;
  Normalization normalization = Normalization::raw;

  int n_mels() const { return static_cast<int>(values.rows()); }
  int n_frames() const { return static_cast<int>(values.cols()); }
};

// Slaney-style mel scale and area-normalized triangles, shape n_mels x (n_fft/2+1).
Eigen::MatrixXd mel_filterbank(int sample_rate_hz, int n_fft, int n_mels, double fmin_hz,
                               double fmax_hz);
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Holds the FFT plan; reuse one per thread.
class LogMelExtractor {
 public:
  explicit LogMelExtractor(const FeatureConfig& cfg);
  ~LogMelExtractor();
  LogMelExtractor(const LogMelExtractor&) = delete;
  LogMelExtractor& operator=(const LogMelExtractor&) = delete;

  // Mel power (before the log). Useful for energy bookkeeping.
  Eigen::MatrixXd mel_power(const Waveform& wave) const;
  LogMelSpec compute(const Waveform& wave) const;

  const FeatureConfig& config() const { return cfg_; }
  const Eigen::MatrixXd& filterbank() const { return fb_; }

 private:
  struct Plan;
  FeatureConfig cfg_;
  Eigen::MatrixXd fb_;
  Eigen::VectorXd window_;
  std::unique_ptr<Plan> plan_;
};

LogMelSpec logmel(const Waveform& wave, const FeatureConfig& cfg);

// minmax01: per-spectrogram min -> 0, max -> 1 (constant -> 0.5).
// zscore: per-spectrogram mean/std (constant -> 0).
LogMelSpec normalize(const LogMelSpec& spec, Normalization mode);

// Disk cache of spectrograms keyed by (clip content hash, config fingerprint).
class FeatureCache {
 public:
  FeatureCache(std::filesystem::path dir, const FeatureConfig& cfg);

  std::filesystem::path entry(const std::string& clip_fingerprint) const;
  bool load(const std::string& clip_fingerprint, LogMelSpec& out) const;
  void store(const std::string& clip_fingerprint, const LogMelSpec& spec) const;

 private:
  std::filesystem::path dir_;
  std::string cfg_fp_;
  double hop_s_;
};

}  // namespace tldg
