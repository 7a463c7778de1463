// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace tldg {

// Binary array file layout (little endian):
//   8 bytes  magic "TLDGARR1"
//   u32      dtype (1 = float32, 2 = float64)
//   u32      ndim
//   u64[ndim] dims (row-major)
//   payload
enum class DType : std::uint32_t { f32 = 1, f64 = 2 };

struct ArrayData {
  std::vector<std::uint64_t> shape;
  std::vector<double> values;  // row-major
};

void write_array(const std::filesystem::path& path, std::span<const std::uint64_t> shape,
                 std::span<const double> row_major, DType dtype = DType::f64);
ArrayData read_array(const std::filesystem::path& path);

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                  DType dtype = DType::f64);
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);

void write_vector(const std::filesystem::path& path, const Eigen::VectorXd& v,
                  DType dtype = DType::f64);
Eigen::VectorXd read_vector(const std::filesystem::path& path);

}  // namespace tldg
