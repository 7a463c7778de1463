// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tldg/dataio.hpp"

namespace tldg {

// Mann-Whitney AUC: mean over (normal, anomaly) pairs of [a > n] + 0.5 [a == n].
double auc(std::span<const double> normal, std::span<const double> anomaly);

// Area under the ROC curve over FPR in [0, p], divided by p. Tie blocks are
// joined by straight (diagonal) segments. pauc(n, a, 1.0) == auc(n, a).
double pauc(std::span<const double> normal, std::span<const double> anomaly, double p);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// One point per distinct score (descending thresholds), starting at (0, 0).
std::vector<RocPoint> roc_curve(std::span<const double> normal, std::span<const double> anomaly);

// ---------------------------------------------------------------------------
// Score tables.

struct ScoreRow {
  std::string clip_path;
  std::string machine_type;
  Label label = Label::unknown;
  std::string scorer_kind;
  double score = 0.0;
};

using ScoreTable = std::vector<ScoreRow>;

// Tab separated with a header row; scores use 17 significant digits.
void write_score_table(const std::filesystem::path& path, const ScoreTable& table);
ScoreTable read_score_table(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Reports.

struct MachineReport {
  std::string machine_type;
  std::string scorer_kind;
  std::optional<double> auc;  // empty when the test split has a single class
  std::optional<double> pauc;
  int n_normal = 0;
  int n_anomaly = 0;
};

struct EvalReport {
  std::vector<MachineReport> machines;  // sorted by machine type
  std::optional<double> mean_auc;       // over machines with both classes
  std::optional<double> mean_pauc;
  double p = 0.1;
  std::string config_echo = "{}";  // JSON text
};

// Rows with an unknown label are ignored.
EvalReport build_report(const ScoreTable& table, double p, const std::string& config_echo = "{}");

std::string render_report_table(const EvalReport& report);
std::string render_report_summary(const EvalReport& report);

// Writes report.tsv and summary.json into `dir`.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace tldg
