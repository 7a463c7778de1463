// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "tldg/features.hpp"
#include "tldg/ldgan.hpp"

namespace tldg {

struct LocalizationResult {
  std::string clip;
  LogMelSpec input;
  LogMelSpec reconstruction;
  LogMelSpec train_average;
  Eigen::MatrixXd difference;             // |input - reconstruction|
  Eigen::MatrixXd difference_to_average;  // |reconstruction - train_average|
};

using Reconstructor = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

LocalizationResult localize(const LogMelSpec& input, const Eigen::MatrixXd& train_average,
                            const Reconstructor& reconstruct, const std::string& clip = "");

// Throws invalid_state for an untrained model.
LocalizationResult localize(const LogMelSpec& input, const LdganModel& model,
                            std::uint64_t noise_seed, const std::string& clip = "");

// Frame index with the largest column sum.
int peak_frame(const Eigen::MatrixXd& difference);

struct RenderedFiles {
  std::filesystem::path png;
  std::filesystem::path diff;
  std::filesystem::path diff_average;
};

// <stem>.triptych.png: reconstruction, train average and difference stacked
// top to bottom, F rows each, one column per frame, low frequencies at the
// bottom of each panel. The first two panels share one colour scale; the
// difference is scaled on its own. Also writes <stem>.diff.bin and
// <stem>.diff_avg.bin.
RenderedFiles render(const LocalizationResult& result, const std::filesystem::path& out_dir,
                     const std::string& stem);

}  // namespace tldg
