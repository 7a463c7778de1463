// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>

#include <doctest.h>

#include "tldg/array_io.hpp"
#include "tldg/error.hpp"
#include "tldg/localize.hpp"
#include "tldg/png_writer.hpp"

using namespace tldg;
namespace fs = std::filesystem;

TEST_CASE("difference map and peak frame") {
  LogMelSpec in;
  in.values = Eigen::MatrixXd::Constant(8, 12, -3.0);
  in.values.col(7).array() += 2.0;
  const Eigen::MatrixXd avg = Eigen::MatrixXd::Constant(8, 12, -3.0);
  const Reconstructor identity_floor = [](const Eigen::MatrixXd& x) {
    return Eigen::MatrixXd::Constant(x.rows(), x.cols(), -3.0);
  };
  const auto r = localize(in, avg, identity_floor, "clip");
  CHECK(r.difference.rows() == 8);
  CHECK(r.difference.cols() == 12);
  CHECK(r.difference.minCoeff() >= 0.0);
  CHECK(peak_frame(r.difference) == 7);
  CHECK(r.difference_to_average.isZero());
  CHECK(r.clip == "clip");
  const Reconstructor same = [](const Eigen::MatrixXd& x) { return x; };
  CHECK(localize(in, avg, same).difference.isZero());
}

TEST_CASE("rendering writes the triptych and the difference arrays") {
  const auto dir = fs::temp_directory_path() / "tldg_localize_test";
  fs::remove_all(dir);
  LogMelSpec in;
  in.values = Eigen::MatrixXd::Random(6, 10);
  const Reconstructor half = [](const Eigen::MatrixXd& x) { return Eigen::MatrixXd(0.5 * x); };
  const auto r = localize(in, Eigen::MatrixXd::Zero(6, 10), half);
  const auto files = render(r, dir, "fan_anomaly_id_00_00000001");
  CHECK(files.png.filename() == "fan_anomaly_id_00_00000001.triptych.png");
  CHECK(files.diff.filename() == "fan_anomaly_id_00_00000001.diff.bin");
  CHECK(fs::exists(files.diff_average));
  const auto img = read_png(files.png);
  CHECK(img.width == 10);
  CHECK(img.height == 18);
  CHECK(read_matrix(files.diff).isApprox(r.difference, 1e-12));
  fs::remove_all(dir);
}

TEST_CASE("png round trip") {
  const auto path = fs::temp_directory_path() / "tldg_png_test.png";
  RgbImage img;
  img.width = 3;
  img.height = 2;
  img.rgb.assign(18, 0);
  img.rgb[4] = 200;
  write_png(path, img);
  const auto back = read_png(path);
  CHECK(back.rgb == img.rgb);
  fs::remove(path);
  CHECK(heat_color(0.0) != heat_color(1.0));
}

TEST_CASE("mismatched shapes are rejected") {
  LogMelSpec in;
  in.values = Eigen::MatrixXd::Zero(4, 4);
  const Reconstructor bad = [](const Eigen::MatrixXd&) { return Eigen::MatrixXd::Zero(3, 4); };
  CHECK_THROWS_AS(localize(in, Eigen::MatrixXd::Zero(4, 4), bad), Error);
}
