// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/localize.hpp"

#include "tldg/array_io.hpp"
#include "tldg/error.hpp"
#include "tldg/png_writer.hpp"

namespace tldg {

namespace fs = std::filesystem;

LocalizationResult localize(const LogMelSpec& input, const Eigen::MatrixXd& train_average,
                            const Reconstructor& reconstruct, const std::string& clip) {
  if (train_average.rows() != input.values.rows() || train_average.cols() != input.values.cols())
    fail(Errc::invalid_input, "train average geometry does not match the clip spectrogram");
  LocalizationResult r;
  r.clip = clip;
  r.input = input;
  r.reconstruction = input;
  r.reconstruction.values = reconstruct(input.values);
  if (r.reconstruction.values.rows() != input.values.rows() ||
      r.reconstruction.values.cols() != input.values.cols())
    fail(Errc::invalid_state, "reconstruction geometry does not match the input");
  r.train_average = input;
  r.train_average.values = train_average;
  r.difference = (input.values - r.reconstruction.values).cwiseAbs();
  r.difference_to_average = (r.reconstruction.values - train_average).cwiseAbs();
  return r;
}

LocalizationResult localize(const LogMelSpec& input, const LdganModel& model,
                            std::uint64_t noise_seed, const std::string& clip) {
  if (!model.trained()) fail(Errc::invalid_state, "localize needs a trained model");
  return localize(
      input, model.train_average(),
      [&](const Eigen::MatrixXd& s) { return model.reconstruct({s}, {noise_seed}).front().spec; },
      clip);
}

int peak_frame(const Eigen::MatrixXd& difference) {
  if (difference.size() == 0) fail(Errc::invalid_input, "empty difference map");
  Eigen::Index t;
  difference.colwise().sum().maxCoeff(&t);
  return static_cast<int>(t);
}

namespace {

void paint(RgbImage& img, int y0, const Eigen::MatrixXd& m, double lo, double hi) {
  const auto f = static_cast<int>(m.rows());
  const double span = hi > lo ? hi - lo : 1.0;
  for (int r = 0; r < f; ++r)
    for (int t = 0; t < m.cols(); ++t) {
      const double v = hi > lo ? (m(f - 1 - r, t) - lo) / span : 0.0;
      const auto c = heat_color(v);
      std::copy(c.begin(), c.end(), img.pixel(t, y0 + r));
    }
}

}  // namespace

RenderedFiles render(const LocalizationResult& result, const fs::path& out_dir,
                     const std::string& stem) {
  const auto& rec = result.reconstruction.values;
  const auto& avg = result.train_average.values;
  const auto f = static_cast<int>(rec.rows());
  const auto t = static_cast<int>(rec.cols());
  if (f == 0 || t == 0) fail(Errc::invalid_input, "empty localization result");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(Errc::io_error, "cannot create " + out_dir.string() + ": " + ec.message());

  RgbImage img(t, 3 * f);
  const double lo = std::min(rec.minCoeff(), avg.minCoeff());
  const double hi = std::max(rec.maxCoeff(), avg.maxCoeff());
  paint(img, 0, rec, lo, hi);
  paint(img, f, avg, lo, hi);
  paint(img, 2 * f, result.difference, result.difference.minCoeff(), result.difference.maxCoeff());

  RenderedFiles out{out_dir / (stem + ".triptych.png"), out_dir / (stem + ".diff.bin"),
                    out_dir / (stem + ".diff_avg.bin")};
  write_png(out.png, img);
  write_matrix(out.diff, result.difference);
  write_matrix(out.diff_average, result.difference_to_average);
  return out;
}

}  // namespace tldg
