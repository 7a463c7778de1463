// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "tldg/dataio.hpp"
#include "tldg/error.hpp"
#include "tldg/hash.hpp"

namespace fs = std::filesystem;

namespace tldg {

std::string_view to_string(AnomalyFamily family) {
  switch (family) {
    case AnomalyFamily::tonal_shift: return "tonal_shift";
    case AnomalyFamily::impulse_train: return "impulse_train";
    case AnomalyFamily::noise_burst: return "noise_burst";
  }
  return "tonal_shift";
}

AnomalyFamily parse_anomaly_family(std::string_view s) {
  if (s == "tonal_shift") return AnomalyFamily::tonal_shift;
  if (s == "impulse_train") return AnomalyFamily::impulse_train;
  if (s == "noise_burst") return AnomalyFamily::noise_burst;
  fail(Errc::invalid_spec, "unknown anomaly family '" + std::string(s) + "'");
}

std::string synthetic_type_name(int machine_index) {
  return std::string(kSyntheticPrefix) + "-" + std::to_string(machine_index);
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kHarmonics = 10;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  Fnv1a h;
  h.update_u64(a);
  h.update_u64(b);
  h.update_u64(c);
  h.update_u64(d);
  return h.digest();
}

struct MachineProfile {
  double f0_hz;
  std::array<double, kHarmonics> amps;
};

MachineProfile machine_profile(const SynthSpec& spec, int machine_index) {
  std::mt19937_64 rng(mix_seed(spec.seed, 0x6d616368ULL, static_cast<std::uint64_t>(machine_index), 0));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  static constexpr double kBase[] = {110.0, 175.0, 260.0, 390.0};
  double f0 = machine_index < 4 ? kBase[machine_index] : 110.0 * std::pow(1.5, machine_index);
  MachineProfile p{};
  p.f0_hz = f0 * (0.97 + 0.06 * u(rng));
  for (int h = 0; h < kHarmonics; ++h)
    p.amps[h] = std::pow(h + 1.0, -0.8) * (0.4 + 1.2 * u(rng));
  return p;
}

struct ClipParams {
  double f0_hz;
  std::array<double, kHarmonics> amps;
  std::array<double, kHarmonics> phases;
  double am_depth, am_rate_hz, am_phase;
};

std::vector<double> harmonic_part(const ClipParams& c, double f0, std::size_t n, int sr, double level) {
  double power = 0.0;
  for (double a : c.amps) power += a * a / 2.0;
  const double scale = level / std::sqrt(power);
  std::vector<double> x(n, 0.0);
  const double nyquist = sr / 2.0;
  for (int h = 0; h < kHarmonics; ++h) {
    const double f = f0 * (h + 1);
    if (f >= 0.9 * nyquist) break;
    const double w = kTwoPi * f / sr;
    const double a = c.amps[h] * scale;
    for (std::size_t i = 0; i < n; ++i) x[i] += a * std::sin(w * static_cast<double>(i) + c.phases[h]);
  }
  const double wa = kTwoPi * c.am_rate_hz / sr;
  for (std::size_t i = 0; i < n; ++i)
    x[i] *= 1.0 + c.am_depth * std::sin(wa * static_cast<double>(i) + c.am_phase);
  return x;
}

// RBJ band-pass biquad (constant 0 dB peak gain).
std::vector<double> bandpass(const std::vector<double>& x, double center_hz, double q, int sr) {
  const double w0 = kTwoPi * center_hz / sr;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  std::vector<double> y(x.size());
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = b0 * x[i] + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x[i];
    y2 = y1;
    y1 = v;
    y[i] = v;
  }
  return y;
}

}  // namespace

SynthClip synthesize_clip(const SynthSpec& spec, int machine_index, std::uint64_t clip_key,
                          std::optional<AnomalyFamily> family) {
  const int sr = spec.sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * sr));
  const MachineProfile profile = machine_profile(spec, machine_index);

  std::mt19937_64 rng(mix_seed(spec.seed, static_cast<std::uint64_t>(machine_index), clip_key, 1));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  ClipParams c{};
  c.f0_hz = profile.f0_hz * (1.0 + 0.003 * gauss(rng));
  for (int h = 0; h < kHarmonics; ++h) {
    c.amps[h] = profile.amps[h] * std::exp(0.08 * gauss(rng));
    c.phases[h] = kTwoPi * u(rng);
  }
  c.am_depth = 0.05 + 0.10 * u(rng);
  c.am_rate_hz = 0.3 + 1.7 * u(rng);
  c.am_phase = kTwoPi * u(rng);

  constexpr double kLevel = 0.1;
  std::vector<double> hum = harmonic_part(c, c.f0_hz, n, sr, kLevel);
  std::vector<double> noise(n);
  for (auto& v : noise) v = spec.background_level * gauss(rng);

  SynthClip clip;
  clip.base.sample_rate_hz = sr;
  clip.base.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) clip.base.samples[i] = hum[i] + noise[i];
  clip.wave = clip.base;
  clip.family = family;
  if (!family) return clip;

  // The injection draws from its own stream so the base clip is identical
  // to what the same key would produce without an anomaly.
  std::mt19937_64 arng(mix_seed(spec.seed, static_cast<std::uint64_t>(machine_index), clip_key, 2));
  auto& w = clip.wave.samples;
  switch (*family) {
    case AnomalyFamily::tonal_shift: {
      std::vector<double> shifted = harmonic_part(c, c.f0_hz * spec.tonal_shift_ratio, n, sr, kLevel);
      for (std::size_t i = 0; i < n; ++i) w[i] = shifted[i] + noise[i];
      break;
    }
    case AnomalyFamily::impulse_train: {
      const double period = spec.impulse_period_s;
      const double onset0 = 0.1 + (period - 0.1) * u(arng);
      const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(spec.impulse_length_s * sr));
      for (double t = onset0; t + spec.impulse_length_s < spec.duration_s; t += period) {
        const auto start = static_cast<std::size_t>(std::llround(t * sr));
        clip.event_times_s.push_back(static_cast<double>(start) / sr);
        for (std::size_t k = 0; k < len && start + k < n; ++k) {
          const double env = std::exp(-static_cast<double>(k) / (0.25 * static_cast<double>(len)));
          w[start + k] += spec.impulse_amplitude * env * gauss(arng);
        }
      }
      break;
    }
    case AnomalyFamily::noise_burst: {
      const double dur = std::min(spec.burst_duration_s, 0.5 * spec.duration_s);
      const double start_s = 0.25 * spec.duration_s * u(arng) + 0.1 * spec.duration_s;
      const auto start = static_cast<std::size_t>(start_s * sr);
      const auto len = std::min(n - start, static_cast<std::size_t>(dur * sr));
      const double center = 1500.0 + 3000.0 * u(arng);
      std::vector<double> white(len);
      for (auto& v : white) v = gauss(arng);
      std::vector<double> band = bandpass(white, center, 2.0, sr);
      double rms = 0.0;
      for (double v : band) rms += v * v;
      rms = std::sqrt(rms / static_cast<double>(std::max<std::size_t>(len, 1)));
      const auto fade = static_cast<std::size_t>(0.02 * sr);
      for (std::size_t k = 0; k < len; ++k) {
        double g = 1.0;
        if (k < fade) g = static_cast<double>(k) / fade;
        if (len - k < fade) g = std::min(g, static_cast<double>(len - k) / fade);
        w[start + k] += spec.burst_level * g * band[k] / rms;
      }
      clip.event_times_s = {static_cast<double>(start) / sr, static_cast<double>(start + len) / sr};
      break;
    }
  }
  return clip;
}

Manifest generate_synthetic_corpus(const SynthSpec& spec, const fs::path& out) {
  if (spec.machine_types < 1) fail(Errc::invalid_spec, "need at least one machine type");
  if (spec.normals_train < 2 || spec.normals_test < 2 || spec.anomalies_test < 2)
    fail(Errc::invalid_spec, "every split needs at least 2 clips per machine type");
  if (spec.duration_s < 1.0 || spec.duration_s > 15.0)
    fail(Errc::invalid_spec, "clip duration must lie in [1, 15] s");
  if (spec.sample_rate_hz < 8000) fail(Errc::invalid_spec, "sample rate too low");
  if (spec.families.empty()) fail(Errc::invalid_spec, "no anomaly families configured");

  try {
    fs::create_directories(out);
  } catch (const fs::filesystem_error& e) {
    fail(Errc::io_error, std::string("cannot create corpus directory: ") + e.what());
  }

  Manifest manifest;
  manifest.seed = spec.seed;
  std::ostringstream events;
  events << "# path\tfamily\tevent_times_s\n";

  auto emit = [&](int m, Split split, Label label, int index, std::optional<AnomalyFamily> family,
                  std::uint64_t key) {
    const std::string type = synthetic_type_name(m);
    const fs::path dir = out / type / std::string(to_string(split));
    try {
      fs::create_directories(dir);
    } catch (const fs::filesystem_error& e) {
      fail(Errc::io_error, std::string("cannot create directory: ") + e.what());
    }
    char name[64];
    std::snprintf(name, sizeof(name), "%s_id_00_%08d.wav", label == Label::anomaly ? "anomaly" : "normal",
                  index);
    SynthClip clip = synthesize_clip(spec, m, key, family);
    const fs::path path = dir / name;
    write_wav_pcm16(path, clip.wave);
    ClipRecord r;
    r.path = path;
    r.machine_type = type;
    r.machine_id = "id_00";
    r.label = label;
    r.split = split;
    r.sample_rate_hz = spec.sample_rate_hz;
    r.duration_s = clip.wave.duration_s();
    manifest.records.push_back(std::move(r));
    if (family) {
      events << (fs::path(type) / std::string(to_string(split)) / name).generic_string() << '\t'
             << to_string(*family) << '\t';
      for (std::size_t i = 0; i < clip.event_times_s.size(); ++i) {
        char t[32];
        std::snprintf(t, sizeof(t), "%.6f", clip.event_times_s[i]);
        events << (i ? "," : "") << t;
      }
      events << '\n';
    }
  };

  for (int m = 0; m < spec.machine_types; ++m) {
    for (int i = 0; i < spec.normals_train; ++i)
      emit(m, Split::train, Label::normal, i, std::nullopt, (0ULL << 32) | static_cast<std::uint64_t>(i));
    for (int i = 0; i < spec.normals_test; ++i)
      emit(m, Split::test, Label::normal, i, std::nullopt, (1ULL << 32) | static_cast<std::uint64_t>(i));
    for (int i = 0; i < spec.anomalies_test; ++i)
      emit(m, Split::test, Label::anomaly, i, spec.families[static_cast<std::size_t>(i) % spec.families.size()],
           (2ULL << 32) | static_cast<std::uint64_t>(i));
  }

  {
    std::ofstream ev(out / "anomalies.tsv", std::ios::trunc);
    if (!ev) fail(Errc::io_error, "cannot write anomalies.tsv");
    ev << events.str();
  }
  manifest.corpus_fingerprint = corpus_fingerprint(manifest.records, out);
  return manifest;
}

std::vector<AnomalyEvent> read_anomaly_events(const fs::path& corpus_root) {
  std::ifstream in(corpus_root / "anomalies.tsv");
  if (!in) fail(Errc::io_error, "no anomalies.tsv under " + corpus_root.string());
  std::vector<AnomalyEvent> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string path, family, times;
    std::getline(ss, path, '\t');
    std::getline(ss, family, '\t');
    std::getline(ss, times, '\t');
    AnomalyEvent e{corpus_root / path, parse_anomaly_family(family), {}};
    std::stringstream ts(times);
    std::string tok;
    while (std::getline(ts, tok, ','))
      if (!tok.empty()) e.times_s.push_back(std::stod(tok));
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace tldg
