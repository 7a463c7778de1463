// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/features.hpp"

#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "tldg/array_io.hpp"
#include "tldg/error.hpp"
#include "tldg/hash.hpp"

namespace tldg {

namespace {
// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

constexpr double kMinLogHz = 1000.0;
constexpr double kLinearHzPerMel = 200.0 / 3.0;
const double kMinLogMel = kMinLogHz / kLinearHzPerMel;
const double kLogStep = std::log(6.4) / 27.0;
}  // namespace

std::size_t FeatureConfig::clip_samples() const {
  return static_cast<std::size_t>(std::llround(clip_duration_s * sample_rate_hz));
}

int FeatureConfig::expected_frames() const {
  const auto n = static_cast<long>(clip_samples());
  if (center) return static_cast<int>(1 + n / hop);
  return n < n_fft ? 0 : static_cast<int>(1 + (n - n_fft) / hop);
}

std::string FeatureConfig::fingerprint() const {
  Fnv1a h;
  h.update_u64(static_cast<std::uint64_t>(sample_rate_hz));
  h.update_u64(static_cast<std::uint64_t>(n_fft));
  h.update_u64(static_cast<std::uint64_t>(hop));
  h.update_u64(static_cast<std::uint64_t>(n_mels));
  h.update_f64(fmin_hz);
  h.update_f64(fmax_hz);
  h.update_u64(center ? 2 : 0);  // 2: reflect padding
  h.update_f64(log_eps);
  h.update_f64(clip_duration_s);
  return h.hex();
}

double hz_to_mel(double hz) {
  if (hz < kMinLogHz) return hz / kLinearHzPerMel;
  return kMinLogMel + std::log(hz / kMinLogHz) / kLogStep;
}

double mel_to_hz(double mel) {
  if (mel < kMinLogMel) return mel * kLinearHzPerMel;
  return kMinLogHz * std::exp(kLogStep * (mel - kMinLogMel));
}

Eigen::MatrixXd mel_filterbank(int sample_rate_hz, int n_fft, int n_mels, double fmin_hz,
                               double fmax_hz) {
  if (n_mels < 1 || n_fft < 2 || fmax_hz <= fmin_hz || fmin_hz < 0.0 ||
      fmax_hz > sample_rate_hz / 2.0 + 1e-9)
    fail(Errc::invalid_config, "bad mel filterbank parameters");
  const int n_bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(fmin_hz), mel_hi = hz_to_mel(fmax_hz);
  Eigen::VectorXd edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_mels, n_bins);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    const double enorm = 2.0 / (hi - lo);
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate_hz / n_fft;
      const double up = (f - lo) / (mid - lo);
      const double down = (hi - f) / (hi - mid);
      fb(m, k) = std::max(0.0, std::min(up, down)) * enorm;
    }
  }
  return fb;
}

struct LogMelExtractor::Plan {
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;
};

LogMelExtractor::LogMelExtractor(const FeatureConfig& cfg)
    : cfg_(cfg), plan_(std::make_unique<Plan>()) {
  if (cfg.n_fft < 2 || cfg.hop < 1) fail(Errc::invalid_config, "n_fft and hop must be positive");
  fb_ = mel_filterbank(cfg.sample_rate_hz, cfg.n_fft, cfg.n_mels, cfg.fmin_hz, cfg.fmax_hz);
  window_.resize(cfg.n_fft);
  for (int i = 0; i < cfg.n_fft; ++i)
    window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.n_fft);
  std::lock_guard lock(planner_mutex());
  plan_->in = fftw_alloc_real(static_cast<std::size_t>(cfg.n_fft));
  plan_->out = fftw_alloc_complex(static_cast<std::size_t>(cfg.n_fft / 2 + 1));
  plan_->plan = fftw_plan_dft_r2c_1d(cfg.n_fft, plan_->in, plan_->out, FFTW_ESTIMATE);
}

LogMelExtractor::~LogMelExtractor() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan_->plan);
  fftw_free(plan_->in);
  fftw_free(plan_->out);
}

Eigen::MatrixXd LogMelExtractor::mel_power(const Waveform& wave) const {
  const int n_fft = cfg_.n_fft;
  const auto n = static_cast<long>(wave.samples.size());
  if (n < n_fft) fail(Errc::invalid_input, "waveform shorter than one FFT window");
  for (double s : wave.samples)
    if (!std::isfinite(s)) fail(Errc::invalid_input, "waveform contains non-finite samples");

  const long pad = cfg_.center ? n_fft / 2 : 0;
  const long frames = 1 + (n + 2 * pad - n_fft) / cfg_.hop;
  const int n_bins = n_fft / 2 + 1;
  Eigen::MatrixXd power(n_bins, frames);
  for (long t = 0; t < frames; ++t) {
    const long start = t * cfg_.hop - pad;
    for (int i = 0; i < n_fft; ++i) {
      long j = start + i;
      if (j < 0) j = -j;  // reflect padding, n >= n_fft so one fold suffices
      if (j >= n) j = 2 * (n - 1) - j;
      plan_->in[i] = wave.samples[static_cast<std::size_t>(j)] * window_[i];
    }
    fftw_execute(plan_->plan);
    for (int k = 0; k < n_bins; ++k)
      power(k, t) = plan_->out[k][0] * plan_->out[k][0] + plan_->out[k][1] * plan_->out[k][1];
  }
  return fb_ * power;
}

LogMelSpec LogMelExtractor::compute(const Waveform& wave) const {
  if (wave.sample_rate_hz != cfg_.sample_rate_hz)
    fail(Errc::invalid_input, "waveform sample rate does not match the feature config");
  LogMelSpec spec;
  spec.values = (mel_power(wave).array() + cfg_.log_eps).log().matrix();
  spec.frame_hop_s = static_cast<double>(cfg_.hop) / cfg_.sample_rate_hz;
  spec.normalization = Normalization::raw;
  return spec;
}

LogMelSpec logmel(const Waveform& wave, const FeatureConfig& cfg) {
  return LogMelExtractor(cfg).compute(wave);
}

LogMelSpec normalize(const LogMelSpec& spec, Normalization mode) {
  LogMelSpec out = spec;
  out.normalization = mode;
  if (mode == Normalization::raw || spec.values.size() == 0) return out;
  if (mode == Normalization::minmax01) {
    const double lo = spec.values.minCoeff(), hi = spec.values.maxCoeff();
    if (hi > lo)
      out.values = (spec.values.array() - lo) / (hi - lo);
    else
      out.values.setConstant(0.5);
  } else {
    const double mean = spec.values.mean();
    const double var = (spec.values.array() - mean).square().mean();
    if (var > 0.0)
      out.values = (spec.values.array() - mean) / std::sqrt(var);
    else
      out.values.setZero();
  }
  return out;
}

FeatureCache::FeatureCache(std::filesystem::path dir, const FeatureConfig& cfg)
    : dir_(std::move(dir)),
      cfg_fp_(cfg.fingerprint()),
      hop_s_(static_cast<double>(cfg.hop) / cfg.sample_rate_hz) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) fail(Errc::io_error, "cannot create feature cache " + dir_.string());
}

std::filesystem::path FeatureCache::entry(const std::string& clip_fingerprint) const {
  return dir_ / (clip_fingerprint + "_" + cfg_fp_ + ".bin");
}

bool FeatureCache::load(const std::string& clip_fingerprint, LogMelSpec& out) const {
  const auto path = entry(clip_fingerprint);
  if (!std::filesystem::exists(path)) return false;
  out.values = read_matrix(path);
  out.frame_hop_s = hop_s_;
  out.normalization = Normalization::raw;
  return true;
}

void FeatureCache::store(const std::string& clip_fingerprint, const LogMelSpec& spec) const {
  write_matrix(entry(clip_fingerprint), spec.values);
}

}  // namespace tldg
