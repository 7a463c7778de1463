// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tldg/wav.hpp"

namespace tldg {

enum class Label { normal, anomaly, unknown };
enum class Split { train, validation, test };

std::string_view to_string(Label label);
std::string_view to_string(Split split);
Label parse_label(std::string_view s);
Split parse_split(std::string_view s);

// The six DCASE 2020 Task 2 machine types. Synthetic corpora use
// "synthetic-<n>" names; machine types are otherwise open strings.
inline constexpr std::string_view kDcaseMachineTypes[] = {"fan",    "pump",   "slider",
                                                          "valve",  "ToyCar", "ToyConveyor"};
inline constexpr std::string_view kSyntheticPrefix = "synthetic";

bool is_synthetic_type(std::string_view machine_type);

struct ClipRecord {
  std::filesystem::path path;
  std::string machine_type;
  std::string machine_id;
  Label label = Label::unknown;
  Split split = Split::train;
  int sample_rate_hz = 16000;
  double duration_s = 0.0;
};

struct Manifest {
  std::vector<ClipRecord> records;
  std::string corpus_fingerprint;
  std::uint64_t seed = 0;

  std::vector<std::string> machine_types() const;  // sorted, unique
  std::vector<const ClipRecord*> select(std::string_view machine_type, Split split) const;
  std::size_t count(Split split) const;
};

struct ScanOptions {
  double validation_fraction = 0.5;
  std::uint64_t seed = 0;
  int sample_rate_hz = 16000;
  double max_unreadable_fraction = 0.10;
  double min_duration_s = 1.0;
  double max_duration_s = 15.0;
};

struct ScanWarning {
  std::filesystem::path path;
  std::string reason;
};

// Reads a DCASE 2020 Task 2 layout: <root>/<machine_type>/{train,test}/
// {normal,anomaly}_id_XX_NNNNNNNN.wav. Files without a normal/anomaly prefix
// are labelled unknown and stay in the test split.
Manifest scan_dcase_corpus(const std::filesystem::path& root, const ScanOptions& options,
                           std::vector<ScanWarning>* warnings = nullptr);

// Moves a stratified fraction of the labelled test clips of every
// (machine_type, label) group into the validation split. Groups with at
// least two clips keep at least one clip on each side.
void assign_validation(Manifest& manifest, double fraction, std::uint64_t seed);

// Train clips are all normal; every machine type that appears in test has
// both classes in validation and in test. Throws invalid_config otherwise.
void check_manifest(const Manifest& manifest);

// Content fingerprint over relative paths and file bytes, in record order.
std::string corpus_fingerprint(const std::vector<ClipRecord>& records,
                               const std::filesystem::path& root);

Waveform load_waveform(const ClipRecord& record);

// Line-delimited, tab-separated; relative paths are resolved against the
// manifest's directory.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic machine-sound corpus.

enum class AnomalyFamily { tonal_shift, impulse_train, noise_burst };

std::string_view to_string(AnomalyFamily family);
AnomalyFamily parse_anomaly_family(std::string_view s);

struct SynthSpec {
  int machine_types = 3;
  int normals_train = 64;
  int normals_test = 16;
  int anomalies_test = 16;
  double duration_s = 10.0;
  int sample_rate_hz = 16000;
  std::uint64_t seed = 7;
  std::vector<AnomalyFamily> families = {AnomalyFamily::tonal_shift,
                                         AnomalyFamily::impulse_train,
                                         AnomalyFamily::noise_burst};
  double tonal_shift_ratio = 1.06;
  double impulse_period_s = 0.5;
  double impulse_amplitude = 0.35;
  double impulse_length_s = 0.005;
  double burst_duration_s = 1.5;
  double burst_level = 0.04;
  double background_level = 0.002;
};

struct SynthClip {
  Waveform base;  // the normal clip the anomaly was injected into
  Waveform wave;
  std::optional<AnomalyFamily> family;
  std::vector<double> event_times_s;  // impulse onsets, or burst [start, end]
};

// Deterministic in (spec.seed, machine_index, clip_key, family).
SynthClip synthesize_clip(const SynthSpec& spec, int machine_index, std::uint64_t clip_key,
                          std::optional<AnomalyFamily> family);

std::string synthetic_type_name(int machine_index);

// Writes a DCASE-style tree under `out` plus `anomalies.tsv` (relative path,
// family, comma separated event times). All labelled test clips come back
// with split=test; use assign_validation to carve out validation.
Manifest generate_synthetic_corpus(const SynthSpec& spec, const std::filesystem::path& out);

struct AnomalyEvent {
  std::filesystem::path path;
  AnomalyFamily family;
  std::vector<double> times_s;
};
std::vector<AnomalyEvent> read_anomaly_events(const std::filesystem::path& corpus_root);

}  // namespace tldg
