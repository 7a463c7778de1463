// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

// Single-file binary archive of named float64 tensors plus string metadata.
//
//   8 bytes "TLDGCKP1"
//   u64 tensor count, then per tensor: u32 name length, name, u32 ndim,
//       i64 dims[ndim], f64 payload
//   u64 meta count, then per entry: u32 key length, key, u64 value length, value
//
// Entries are written in key order so equal archives give equal bytes.

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <Eigen/Dense>

#include "tldg/autograd.hpp"

namespace tldg {

class Archive {
 public:
  void put(const std::string& name, ag::Tensor t);
  const ag::Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return tensors_.count(name) > 0; }

  void put_matrix(const std::string& name, const Eigen::MatrixXd& m);
  Eigen::MatrixXd get_matrix(const std::string& name) const;
  void put_vector(const std::string& name, const Eigen::VectorXd& v);
  Eigen::VectorXd get_vector(const std::string& name) const;
  void put_scalar(const std::string& name, double v);
  double get_scalar(const std::string& name) const;

  void set_meta(const std::string& key, std::string value);
  const std::string& meta(const std::string& key) const;
  bool has_meta(const std::string& key) const { return meta_.count(key) > 0; }

  const std::map<std::string, ag::Tensor>& tensors() const { return tensors_; }
  const std::map<std::string, std::string>& metadata() const { return meta_; }

 private:
  std::map<std::string, ag::Tensor> tensors_;
  std::map<std::string, std::string> meta_;
};

// Writes to a sibling temporary file and renames it into place.
void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

}  // namespace tldg
