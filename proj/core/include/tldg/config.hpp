// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "tldg/dataio.hpp"
#include "tldg/detect.hpp"
#include "tldg/features.hpp"
#include "tldg/ldgan.hpp"
#include "tldg/tmixup.hpp"
#include "tldg/trainer.hpp"

namespace tldg {

struct DataSection {
  bool synthetic = true;
  std::filesystem::path corpus_root;  // DCASE layout when not synthetic
  std::filesystem::path synth_root;   // where cmd_synth writes
  SynthSpec synth;
  double validation_fraction = 0.5;
};

struct RunConfig {
  std::string preset = "desk";
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;

  DataSection data;
  FeatureConfig features;
  TMixupConfig tmixup;
  LdganConfig ldgan;
  TrainConfig train;  // tmixup and seed are filled from the fields above
  LatentSource score_latent_source = LatentSource::reencoded;
  std::string provider = "stub";
  DetectConfig detect;
  double p = 0.1;

  void validate() const;
  // The derived training config with tmixup and seed applied.
  TrainConfig train_config() const;
  // Root of the corpus that train/eval read.
  std::filesystem::path corpus_dir() const;
};

// "paper" or "desk".
RunConfig preset_config(std::string_view name);

// Sectioned JSON: run, data, features, tmixup, ldgan, encoders, detect, metrics.
std::string to_json(const RunConfig& cfg);

// Overlays a JSON document on `base`. Unknown sections or keys and type
// mismatches throw invalid_config.
RunConfig overlay_json(const RunConfig& base, std::string_view text);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

// Applies TLDG_<SECTION>_<KEY> overrides (upper case) for every known key.
RunConfig apply_env_overrides(const RunConfig& base, const EnvLookup& env = process_env);

struct ConfigRequest {
  std::optional<std::string> preset;           // default: the file's run.preset, else desk
  std::optional<std::filesystem::path> file;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
};

// Preset, then file, then environment, then explicit flags.
RunConfig resolve_config(const ConfigRequest& req, const EnvLookup& env = process_env);

}  // namespace tldg
