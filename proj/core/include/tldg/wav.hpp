// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace tldg {

struct Waveform {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  int sample_rate_hz = 16000;

  double duration_s() const {
    return sample_rate_hz > 0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
  }
};

struct WavInfo {
  int sample_rate_hz = 0;
  int channels = 0;
  int bits_per_sample = 0;
  std::uint64_t frames = 0;
};

// Reads the header only. Throws io_error on anything that is not a
// PCM (8/16/24/32-bit) or IEEE-float RIFF/WAVE file.
WavInfo read_wav_info(const std::filesystem::path& path);

// Decodes to mono by averaging channels.
Waveform read_wav(const std::filesystem::path& path);

// 16-bit PCM mono. Samples are clamped to [-1, 1] before quantization.
void write_wav_pcm16(const std::filesystem::path& path, const Waveform& wave);

// Interleaved multi-channel 16-bit writer, used by tests and tooling.
void write_wav_pcm16(const std::filesystem::path& path,
                     const std::vector<std::vector<double>>& channels, int sample_rate_hz);

// Windowed-sinc (Hann, 16 zero crossings) sample-rate conversion.
Waveform resample(const Waveform& wave, int target_rate_hz);

// Zero-pads at the end or truncates to exactly n samples.
void fit_length(Waveform& wave, std::size_t n);

}  // namespace tldg
