// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

// Command implementations behind the tldg CLI. Each command reads a resolved
// RunConfig and writes its outputs under cfg.out_dir.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tldg/config.hpp"
#include "tldg/dataio.hpp"
#include "tldg/detect.hpp"
#include "tldg/error.hpp"
#include "tldg/features.hpp"
#include "tldg/localize.hpp"
#include "tldg/metrics.hpp"
#include "tldg/trainer.hpp"

namespace tldg {

struct RunLayout {
  std::filesystem::path root;
  explicit RunLayout(std::filesystem::path r) : root(std::move(r)) {}
  std::filesystem::path checkpoint() const { return root / "model.ckpt"; }
  std::filesystem::path metrics_log() const { return root / "train_metrics.tsv"; }
  std::filesystem::path diagnostics() const { return root / "diagnostics"; }
  std::filesystem::path resolved_config() const { return root / "config.resolved.json"; }
  std::filesystem::path feature_cache() const { return root / "cache" / "features"; }
  std::filesystem::path eval_dir() const { return root / "eval"; }
  std::filesystem::path scores() const { return eval_dir() / "scores.tsv"; }
  std::filesystem::path validation_scores() const { return eval_dir() / "validation_scores.tsv"; }
  std::filesystem::path selection() const { return eval_dir() / "selection.json"; }
  std::filesystem::path detectors() const { return eval_dir() / "detectors.ckpt"; }
  std::filesystem::path localize_dir() const { return root / "localize"; }
};

struct SynthOutcome {
  Manifest manifest;
  std::filesystem::path manifest_path;
};

// Generates into a temporary sibling directory and renames it into place, so
// a failure leaves no partial corpus behind.
SynthOutcome cmd_synth(const RunConfig& cfg);

// Synthetic: <synth_root>/manifest.tsv. DCASE: scans corpus_root and carves
// out validation. Throws corpus_not_found when the corpus is absent.
Manifest load_corpus(const RunConfig& cfg);

// Log-mel features of one clip at the configured rate and duration.
LogMelSpec clip_features(const ClipRecord& record, const LogMelExtractor& extractor,
                         const FeatureCache* cache = nullptr);
Waveform clip_waveform(const ClipRecord& record, const FeatureConfig& features);

struct TrainOptions {
  bool resume = false;
  TrainHooks hooks;
};

struct TrainOutcome {
  std::filesystem::path checkpoint;
  TrainHistory history;
  int epochs_done = 0;
};

TrainOutcome cmd_train(const RunConfig& cfg, const TrainOptions& options = {});

struct EvalOutcome {
  EvalReport report;
  DetectorSelection selection;
  ScoreTable test_scores;
  ScoreTable validation_scores;  // every available scorer
};

// Default checkpoint: <out_dir>/model.ckpt.
EvalOutcome cmd_eval(const RunConfig& cfg,
                     const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

struct ClipSelector {
  std::optional<std::string> machine_type;  // exact, or a prefix before '-'
  std::optional<Label> label;
  std::optional<Split> split;               // default: test
  std::optional<std::string> machine_id;
  int limit = -1;
};

// "key=value,..." with keys machine_type, label, split, machine_id, limit.
ClipSelector parse_selector(std::string_view text);
std::vector<const ClipRecord*> select_clips(const Manifest& manifest, const ClipSelector& selector);

struct LocalizeOutcome {
  std::vector<RenderedFiles> files;
  std::vector<std::string> clips;
  std::vector<int> peak_frames;
};

LocalizeOutcome cmd_localize(const RunConfig& cfg, const std::string& selector,
                             const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

// Rebuilds report.tsv and summary.json from <out_dir>/eval/scores.tsv (or
// `scores` when given).
EvalReport cmd_report(const RunConfig& cfg,
                      const std::optional<std::filesystem::path>& scores = std::nullopt);

// Reconstruction noise seed for a clip, from the run seed and its path
// relative to the corpus root.
std::uint64_t clip_noise_seed(std::uint64_t run_seed, const std::string& relative_path);

// The config echo stored in reports (no output paths).
std::string report_config_echo(const RunConfig& cfg);

// Exit status for the CLI: 2 config, 3 data, 4 numeric.
int exit_code_for(Errc code);

}  // namespace tldg
