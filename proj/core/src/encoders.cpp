// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/encoders.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "tldg/array_io.hpp"
#include "tldg/error.hpp"
#include "tldg/features.hpp"
#include "tldg/hash.hpp"

namespace tldg {

namespace fs = std::filesystem;

Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v) {
  const double n = v.norm();
  if (!std::isfinite(n) || n <= 0.0) fail(Errc::numeric_failure, "cannot normalize a zero or non-finite embedding");
  return v / n;
}

Eigen::VectorXd pool_frames(const Eigen::MatrixXd& frames) {
  if (frames.rows() == 0 || frames.cols() == 0) fail(Errc::invalid_input, "no frames to pool");
  return l2_normalize(frames.colwise().mean().transpose());
}

std::string clip_fingerprint(const fs::path& path) { return to_hex(hash_file(path)); }

// ---------------------------------------------------------------------------

StubProvider::StubProvider(const StubProviderConfig& cfg) : cfg_(cfg) {
  if (cfg.bands < 2 || cfg.dim < 1 || cfg.n_fft < 2 || cfg.hop < 1)
    fail(Errc::invalid_config, "stub provider needs bands >= 2, dim >= 1, n_fft >= 2, hop >= 1");
  const int in = 2 * cfg.bands + 1;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
  projection_.resize(cfg.dim, in);
  for (int r = 0; r < cfg.dim; ++r)
    for (int c = 0; c < in; ++c) projection_(r, c) = gauss(rng);
}

Eigen::VectorXd StubProvider::band_statistics(const Waveform& wave) const {
  FeatureConfig fc;
  fc.sample_rate_hz = wave.sample_rate_hz;
  fc.n_fft = cfg_.n_fft;
  fc.hop = cfg_.hop;
  fc.n_mels = cfg_.bands;
  fc.fmin_hz = 0.0;
  fc.fmax_hz = wave.sample_rate_hz / 2.0;
  const Eigen::MatrixXd logp =
      (LogMelExtractor(fc).mel_power(wave).array() + fc.log_eps).log().matrix();
  const Eigen::VectorXd mean = logp.rowwise().mean();
  const Eigen::VectorXd sd =
      ((logp.colwise() - mean).array().square().rowwise().mean()).sqrt().matrix();
  Eigen::VectorXd stats(2 * cfg_.bands + 1);
  stats.head(cfg_.bands) = mean.array() - mean.mean();
  stats.segment(cfg_.bands, cfg_.bands) = sd;
  stats[2 * cfg_.bands] = 1.0;
  return stats;
}

EmbeddingVector StubProvider::embed(const Waveform& wave, const std::string& fp) const {
  EmbeddingVector e;
  e.values = l2_normalize(projection_ * band_statistics(wave));
  e.provider_id = id();
  e.clip_fingerprint = fp;
  return e;
}

// ---------------------------------------------------------------------------

CacheManifest read_cache_manifest(const fs::path& dir) {
  const fs::path p = dir / "provider.json";
  std::ifstream in(p);
  if (!in) fail(Errc::provider_error, "embedding cache has no provider.json: " + dir.string());
  try {
    const auto j = nlohmann::json::parse(in);
    CacheManifest m;
    m.provider_id = j.at("provider_id").get<std::string>();
    m.dim = j.at("d_e").get<int>();
    m.pooling = j.value("pooling", "mean");
    m.normalization = j.value("normalization", "l2");
    if (m.dim < 1) fail(Errc::invalid_cache, "provider.json d_e must be positive");
    if (m.pooling != "mean" || m.normalization != "l2")
      fail(Errc::invalid_cache, "unsupported pooling/normalization in " + p.string());
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::invalid_cache, "malformed " + p.string() + ": " + e.what());
  }
}

void write_cache_manifest(const fs::path& dir, const CacheManifest& m) {
  fs::create_directories(dir);
  const nlohmann::json j = {{"provider_id", m.provider_id},
                            {"d_e", m.dim},
                            {"pooling", m.pooling},
                            {"normalization", m.normalization}};
  std::ofstream out(dir / "provider.json", std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) fail(Errc::io_error, "cannot write provider.json in " + dir.string());
}

CacheProvider::CacheProvider(fs::path dir) : dir_(std::move(dir)) {
  if (!fs::is_directory(dir_)) fail(Errc::provider_error, "embedding cache not found: " + dir_.string());
  manifest_ = read_cache_manifest(dir_);
}

bool CacheProvider::contains(const std::string& fp) const {
  return fs::exists(dir_ / (fp + ".bin"));
}

EmbeddingVector CacheProvider::load(const std::string& fp) const {
  const fs::path p = dir_ / (fp + ".bin");
  if (!fs::exists(p))
    fail(Errc::provider_error, "provider " + id() + " has no embedding for clip " + fp);
  ArrayData a;
  try {
    a = read_array(p);
  } catch (const Error& e) {
    fail(Errc::invalid_cache, std::string("unreadable cache entry: ") + e.what());
  }
  Eigen::MatrixXd frames;
  if (a.shape.size() == 1) {
    frames = Eigen::Map<const Eigen::RowVectorXd>(a.values.data(), static_cast<Eigen::Index>(a.shape[0]));
  } else if (a.shape.size() == 2) {
    frames = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        a.values.data(), static_cast<Eigen::Index>(a.shape[0]), static_cast<Eigen::Index>(a.shape[1]));
  } else {
    fail(Errc::invalid_cache, "cache entry must be 1-D or 2-D: " + p.string());
  }
  if (frames.cols() != manifest_.dim)
    fail(Errc::invalid_cache, "cache entry " + p.string() + " has dimension " +
                                  std::to_string(frames.cols()) + ", expected " +
                                  std::to_string(manifest_.dim));
  if (!frames.allFinite()) fail(Errc::invalid_cache, "non-finite values in " + p.string());
  EmbeddingVector e;
  e.values = pool_frames(frames);
  e.provider_id = id();
  e.clip_fingerprint = fp;
  return e;
}

EmbeddingVector CacheProvider::embed(const Waveform&, const std::string& fp) const {
  return load(fp);
}

std::unique_ptr<EmbeddingProvider> make_provider(std::string_view name, std::uint64_t seed) {
  if (name == "stub") {
    StubProviderConfig cfg;
    cfg.seed = seed;
    return std::make_unique<StubProvider>(cfg);
  }
  constexpr std::string_view prefix = "cache:";
  if (name.substr(0, prefix.size()) == prefix && name.size() > prefix.size())
    return std::make_unique<CacheProvider>(fs::path(std::string(name.substr(prefix.size()))));
  fail(Errc::invalid_config, "unknown embedding provider '" + std::string(name) +
                                 "' (expected stub or cache:<dir>)");
}

EmbeddingTable embed_cache_load(const Manifest& manifest, std::string_view provider_id,
                                const fs::path& cache_dir) {
  const CacheProvider cache(cache_dir);
  if (cache.id() != provider_id)
    fail(Errc::invalid_cache, "cache " + cache_dir.string() + " holds provider " + cache.id() +
                                  ", expected " + std::string(provider_id));
  EmbeddingTable table;
  std::vector<std::string> missing;
  for (const auto& r : manifest.records) {
    const std::string fp = clip_fingerprint(r.path);
    if (table.count(fp)) continue;
    if (!cache.contains(fp)) {
      missing.push_back(fp);
      continue;
    }
    table.emplace(fp, cache.load(fp));
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "provider " << provider_id << " is missing " << missing.size() << " embedding(s):";
    for (const auto& fp : missing) msg << ' ' << fp;
    fail(Errc::provider_error, msg.str());
  }
  return table;
}

void embed_cache_dump(const Manifest& manifest, const EmbeddingProvider& provider,
                      const fs::path& cache_dir) {
  write_cache_manifest(cache_dir, {provider.id(), provider.dim(), "mean", "l2"});
  for (const auto& r : manifest.records) {
    const std::string fp = clip_fingerprint(r.path);
    const EmbeddingVector e = provider.embed(load_waveform(r), fp);
    write_vector(cache_dir / (fp + ".bin"), e.values);
  }
}

}  // namespace tldg
