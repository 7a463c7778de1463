// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "tldg/error.hpp"

namespace tldg {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) { return std::uint16_t(p[0] | (p[1] << 8)); }

struct Parsed {
  WavInfo info;
  std::uint16_t format = 0;
  std::vector<unsigned char> data;
};

Parsed parse(const std::filesystem::path& path, bool want_data) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + path.string());
  unsigned char riff[12];
  in.read(reinterpret_cast<char*>(riff), 12);
  if (!in || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(riff + 8, "WAVE", 4) != 0)
    fail(Errc::io_error, "not a RIFF/WAVE file: " + path.string());

  Parsed p;
  bool have_fmt = false;
  while (in) {
    unsigned char hdr[8];
    in.read(reinterpret_cast<char*>(hdr), 8);
    if (!in) break;
    std::uint32_t size = le32(hdr + 4);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      std::vector<unsigned char> fmt(size);
      in.read(reinterpret_cast<char*>(fmt.data()), size);
      if (!in || size < 16) fail(Errc::io_error, "bad fmt chunk in " + path.string());
      p.format = le16(fmt.data());
      p.info.channels = le16(fmt.data() + 2);
      p.info.sample_rate_hz = static_cast<int>(le32(fmt.data() + 4));
      p.info.bits_per_sample = le16(fmt.data() + 14);
      if (p.format == kFormatExtensible && size >= 26) p.format = le16(fmt.data() + 24);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) fail(Errc::io_error, "data chunk before fmt in " + path.string());
      int bytes_per_frame = p.info.channels * (p.info.bits_per_sample / 8);
      if (bytes_per_frame <= 0) fail(Errc::io_error, "bad frame size in " + path.string());
      p.info.frames = size / static_cast<std::uint32_t>(bytes_per_frame);
      if (want_data) {
        p.data.resize(size);
        in.read(reinterpret_cast<char*>(p.data.data()), size);
        if (static_cast<std::uint32_t>(in.gcount()) != size)
          fail(Errc::io_error, "truncated data chunk in " + path.string());
      }
      break;
    } else {
      in.seekg(size + (size & 1u), std::ios::cur);
    }
    if (size & 1u) in.seekg(1, std::ios::cur);
  }
  if (!have_fmt) fail(Errc::io_error, "missing fmt chunk in " + path.string());
  if (p.info.channels <= 0 || p.info.sample_rate_hz <= 0)
    fail(Errc::io_error, "bad channel count or rate in " + path.string());
  bool ok = (p.format == kFormatPcm &&
             (p.info.bits_per_sample == 8 || p.info.bits_per_sample == 16 ||
              p.info.bits_per_sample == 24 || p.info.bits_per_sample == 32)) ||
            (p.format == kFormatFloat && p.info.bits_per_sample == 32);
  if (!ok) fail(Errc::io_error, "unsupported WAV encoding in " + path.string());
  return p;
}

double decode_sample(const unsigned char* s, std::uint16_t format, int bits) {
  if (format == kFormatFloat) {
    float f;
    std::uint32_t u = le32(s);
    std::memcpy(&f, &u, 4);
    return f;
  }
  switch (bits) {
    case 8: return (static_cast<int>(s[0]) - 128) / 128.0;
    case 16: return static_cast<std::int16_t>(le16(s)) / 32768.0;
    case 24: {
      std::int32_t v = s[0] | (s[1] << 8) | (s[2] << 16);
      if (v & 0x800000) v |= ~0xffffff;
      return v / 8388608.0;
    }
    default: return static_cast<std::int32_t>(le32(s)) / 2147483648.0;
  }
}

void write_header(std::ofstream& out, int channels, int rate, std::uint32_t data_bytes) {
  auto put32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
  };
  auto put16 = [&](std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<char*>(b), 2);
  };
  out.write("RIFF", 4);
  put32(36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put32(16);
  put16(kFormatPcm);
  put16(static_cast<std::uint16_t>(channels));
  put32(static_cast<std::uint32_t>(rate));
  put32(static_cast<std::uint32_t>(rate * channels * 2));
  put16(static_cast<std::uint16_t>(channels * 2));
  put16(16);
  out.write("data", 4);
  put32(data_bytes);
}

std::int16_t quantize(double x) {
  x = std::clamp(x, -1.0, 1.0);
  return static_cast<std::int16_t>(std::lround(x * 32767.0));
}

}  // namespace

WavInfo read_wav_info(const std::filesystem::path& path) { return parse(path, false).info; }

Waveform read_wav(const std::filesystem::path& path) {
  Parsed p = parse(path, true);
  const int bytes = p.info.bits_per_sample / 8;
  const int ch = p.info.channels;
  Waveform w;
  w.sample_rate_hz = p.info.sample_rate_hz;
  w.samples.resize(p.info.frames);
  const unsigned char* s = p.data.data();
  for (std::uint64_t i = 0; i < p.info.frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < ch; ++c) {
      acc += decode_sample(s, p.format, p.info.bits_per_sample);
      s += bytes;
    }
    w.samples[i] = acc / ch;
  }
  return w;
}

void write_wav_pcm16(const std::filesystem::path& path, const Waveform& wave) {
  write_wav_pcm16(path, std::vector<std::vector<double>>{wave.samples}, wave.sample_rate_hz);
}

void write_wav_pcm16(const std::filesystem::path& path,
                     const std::vector<std::vector<double>>& channels, int sample_rate_hz) {
  if (channels.empty()) fail(Errc::invalid_input, "no channels to write");
  const std::size_t n = channels.front().size();
  for (const auto& c : channels)
    if (c.size() != n) fail(Errc::invalid_input, "channel lengths differ");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write " + path.string());
  const int ch = static_cast<int>(channels.size());
  write_header(out, ch, sample_rate_hz, static_cast<std::uint32_t>(n * ch * 2));
  std::vector<unsigned char> buf(n * ch * 2);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < ch; ++c) {
      auto v = static_cast<std::uint16_t>(quantize(channels[c][i]));
      buf[k++] = static_cast<unsigned char>(v & 0xff);
      buf[k++] = static_cast<unsigned char>(v >> 8);
    }
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(Errc::io_error, "write failed for " + path.string());
}

Waveform resample(const Waveform& wave, int target_rate_hz) {
  if (target_rate_hz <= 0) fail(Errc::invalid_input, "target sample rate must be positive");
  if (wave.sample_rate_hz == target_rate_hz) return wave;
  const double ratio = static_cast<double>(target_rate_hz) / wave.sample_rate_hz;
  const double cutoff = std::min(1.0, ratio);
  constexpr int kZeroCrossings = 16;
  const double half_width = kZeroCrossings / cutoff;
  const auto n_out = static_cast<std::size_t>(std::llround(wave.samples.size() * ratio));
  const auto n_in = static_cast<long>(wave.samples.size());

  Waveform out;
  out.sample_rate_hz = target_rate_hz;
  out.samples.resize(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double center = static_cast<double>(i) / ratio;
    const long lo = static_cast<long>(std::ceil(center - half_width));
    const long hi = static_cast<long>(std::floor(center + half_width));
    double acc = 0.0;
    for (long j = std::max(lo, 0L); j <= std::min(hi, n_in - 1); ++j) {
      const double x = (center - static_cast<double>(j)) * cutoff;
      const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double win = 0.5 * (1.0 + std::cos(std::numbers::pi * x / kZeroCrossings));
      acc += wave.samples[static_cast<std::size_t>(j)] * sinc * win;
    }
    out.samples[i] = acc * cutoff;
  }
  return out;
}

void fit_length(Waveform& wave, std::size_t n) { wave.samples.resize(n, 0.0); }

}  // namespace tldg
