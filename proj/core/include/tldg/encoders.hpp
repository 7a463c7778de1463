// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "tldg/dataio.hpp"
#include "tldg/wav.hpp"

namespace tldg {

// Clip-level embedding from the waveform branch. Unit L2 norm.
struct EmbeddingVector {
  Eigen::VectorXd values;
  std::string provider_id;
  std::string clip_fingerprint;
};

// Providers are immutable after construction; embed() may be called
// concurrently.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  virtual int dim() const = 0;
  // `clip_fingerprint` keys cache lookups; the stub ignores it for the values.
  virtual EmbeddingVector embed(const Waveform& wave,
                                const std::string& clip_fingerprint) const = 0;
};

struct StubProviderConfig {
  int bands = 64;
  int dim = 256;
  int n_fft = 1024;
  int hop = 512;
  std::uint64_t seed = 0;
};

// Banded log-energy statistics (per-band means centred across bands, per-band
// standard deviations, and a constant) through a seeded Gaussian projection.
// Centring the means makes the vector invariant to a global gain.
class StubProvider final : public EmbeddingProvider {
 public:
  explicit StubProvider(const StubProviderConfig& cfg = {});
  std::string id() const override { return "stub"; }
  int dim() const override { return cfg_.dim; }
  EmbeddingVector embed(const Waveform& wave, const std::string& clip_fingerprint) const override;
  // The pre-projection statistics, 2*bands + 1 long.
  Eigen::VectorXd band_statistics(const Waveform& wave) const;
  const Eigen::MatrixXd& projection() const { return projection_; }

 private:
  StubProviderConfig cfg_;
  Eigen::MatrixXd projection_;
};

// Provider manifest stored as `provider.json` in a cache directory.
struct CacheManifest {
  std::string provider_id;
  int dim = 0;
  std::string pooling = "mean";
  std::string normalization = "l2";
};

CacheManifest read_cache_manifest(const std::filesystem::path& dir);
void write_cache_manifest(const std::filesystem::path& dir, const CacheManifest& m);

// Serves embeddings produced offline: one array file `<fingerprint>.bin` per
// clip, either a pooled vector [d] or frame-level [T, d].
class CacheProvider final : public EmbeddingProvider {
 public:
  explicit CacheProvider(std::filesystem::path dir);
  std::string id() const override { return manifest_.provider_id; }
  int dim() const override { return manifest_.dim; }
  EmbeddingVector embed(const Waveform& wave, const std::string& clip_fingerprint) const override;
  bool contains(const std::string& clip_fingerprint) const;
  EmbeddingVector load(const std::string& clip_fingerprint) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  CacheManifest manifest_;
};

// "stub" or "cache:<dir>".
std::unique_ptr<EmbeddingProvider> make_provider(std::string_view name, std::uint64_t seed);

// Hex content hash of a clip file.
std::string clip_fingerprint(const std::filesystem::path& path);

// Mean over rows, then L2 normalization. Throws numeric_failure on a zero
// or non-finite result.
Eigen::VectorXd pool_frames(const Eigen::MatrixXd& frames);
Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v);

using EmbeddingTable = std::map<std::string, EmbeddingVector>;  // by clip fingerprint

// All clips of `manifest` from a cache directory. Missing entries raise a
// single provider_error listing every missing fingerprint.
EmbeddingTable embed_cache_load(const Manifest& manifest, std::string_view provider_id,
                                const std::filesystem::path& cache_dir);

// Embeds every clip with `provider` and writes a cache directory.
void embed_cache_dump(const Manifest& manifest, const EmbeddingProvider& provider,
                      const std::filesystem::path& cache_dir);

}  // namespace tldg
