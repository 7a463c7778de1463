// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/array_io.hpp"

#include <cstring>
#include <fstream>

#include "tldg/error.hpp"

namespace tldg {

namespace {

constexpr char kMagic[8] = {'T', 'L', 'D', 'G', 'A', 'R', 'R', '1'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) fail(Errc::io_error, "truncated array file " + path.string());
  return v;
}

}  // namespace

void write_array(const std::filesystem::path& path, std::span<const std::uint64_t> shape,
                 std::span<const double> row_major, DType dtype) {
  std::uint64_t count = 1;
  for (auto d : shape) count *= d;
  if (count != row_major.size())
    fail(Errc::invalid_input, "array shape does not match payload size");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dtype));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) put<std::uint64_t>(out, d);
  if (dtype == DType::f64) {
    out.write(reinterpret_cast<const char*>(row_major.data()),
              static_cast<std::streamsize>(row_major.size() * sizeof(double)));
  } else {
    std::vector<float> tmp(row_major.begin(), row_major.end());
    out.write(reinterpret_cast<const char*>(tmp.data()),
              static_cast<std::streamsize>(tmp.size() * sizeof(float)));
  }
  if (!out) fail(Errc::io_error, "write failed for " + path.string());
}

ArrayData read_array(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    fail(Errc::io_error, "not an array file: " + path.string());
  auto dtype = static_cast<DType>(get<std::uint32_t>(in, path));
  auto ndim = get<std::uint32_t>(in, path);
  if (ndim > 8) fail(Errc::io_error, "implausible rank in " + path.string());
  ArrayData a;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    a.shape.push_back(get<std::uint64_t>(in, path));
    count *= a.shape.back();
  }
  a.values.resize(count);
  if (dtype == DType::f64) {
    in.read(reinterpret_cast<char*>(a.values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  } else if (dtype == DType::f32) {
    std::vector<float> tmp(count);
    in.read(reinterpret_cast<char*>(tmp.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    std::copy(tmp.begin(), tmp.end(), a.values.begin());
  } else {
    fail(Errc::io_error, "unknown dtype in " + path.string());
  }
  if (!in) fail(Errc::io_error, "truncated array file " + path.string());
  return a;
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m, DType dtype) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  std::uint64_t shape[2] = {static_cast<std::uint64_t>(m.rows()),
                            static_cast<std::uint64_t>(m.cols())};
  write_array(path, shape, std::span<const double>(rm.data(), rm.size()), dtype);
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  auto a = read_array(path);
  if (a.shape.size() != 2) fail(Errc::io_error, "expected a 2-D array in " + path.string());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      a.values.data(), static_cast<Eigen::Index>(a.shape[0]),
      static_cast<Eigen::Index>(a.shape[1]));
  return m;
}

void write_vector(const std::filesystem::path& path, const Eigen::VectorXd& v, DType dtype) {
  std::uint64_t shape[1] = {static_cast<std::uint64_t>(v.size())};
  write_array(path, shape, std::span<const double>(v.data(), v.size()), dtype);
}

Eigen::VectorXd read_vector(const std::filesystem::path& path) {
  auto a = read_array(path);
  if (a.shape.size() != 1) fail(Errc::io_error, "expected a 1-D array in " + path.string());
  return Eigen::Map<const Eigen::VectorXd>(a.values.data(), static_cast<Eigen::Index>(a.values.size()));
}

}  // namespace tldg
