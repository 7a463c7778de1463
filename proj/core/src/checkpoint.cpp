// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "tldg/error.hpp"

namespace tldg {

namespace {

constexpr char kMagic[8] = {'T', 'L', 'D', 'G', 'C', 'K', 'P', '1'};

template <typename T>
void put_raw(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) fail(Errc::invalid_state, "checkpoint truncated");
  return v;
}

std::string get_string(std::istream& is, std::uint64_t n) {
  if (n > (1ULL << 32)) fail(Errc::invalid_state, "checkpoint string length implausible");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) fail(Errc::invalid_state, "checkpoint truncated");
  return s;
}

}  // namespace

void Archive::put(const std::string& name, ag::Tensor t) { tensors_[name] = std::move(t); }

const ag::Tensor& Archive::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) fail(Errc::invalid_state, "checkpoint has no tensor " + name);
  return it->second;
}

void Archive::put_matrix(const std::string& name, const Eigen::MatrixXd& m) {
  ag::Tensor t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
  put(name, std::move(t));
}

Eigen::MatrixXd Archive::get_matrix(const std::string& name) const {
  const ag::Tensor& t = get(name);
  if (t.rank() != 2) fail(Errc::invalid_state, "checkpoint tensor " + name + " is not a matrix");
  Eigen::MatrixXd m(t.dim(0), t.dim(1));
  for (int i = 0; i < t.dim(0); ++i)
    for (int j = 0; j < t.dim(1); ++j) m(i, j) = t[static_cast<std::size_t>(i) * t.dim(1) + j];
  return m;
}

void Archive::put_vector(const std::string& name, const Eigen::VectorXd& v) {
  put(name, ag::Tensor({static_cast<int>(v.size())}, std::vector<double>(v.data(), v.data() + v.size())));
}

Eigen::VectorXd Archive::get_vector(const std::string& name) const {
  const ag::Tensor& t = get(name);
  return Eigen::Map<const Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
}

void Archive::put_scalar(const std::string& name, double v) { put(name, ag::Tensor::scalar(v)); }

double Archive::get_scalar(const std::string& name) const { return get(name).item(); }

void Archive::set_meta(const std::string& key, std::string value) { meta_[key] = std::move(value); }

const std::string& Archive::meta(const std::string& key) const {
  auto it = meta_.find(key);
  if (it == meta_.end()) fail(Errc::invalid_state, "checkpoint has no metadata key " + key);
  return it->second;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(Errc::io_error, "cannot write " + tmp.string());
    os.write(kMagic, sizeof(kMagic));
    put_raw<std::uint64_t>(os, archive.tensors().size());
    for (const auto& [name, t] : archive.tensors()) {
      put_raw<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      put_raw<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
      for (int d : t.shape()) put_raw<std::int64_t>(os, d);
      os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    put_raw<std::uint64_t>(os, archive.metadata().size());
    for (const auto& [k, v] : archive.metadata()) {
      put_raw<std::uint32_t>(os, static_cast<std::uint32_t>(k.size()));
      os.write(k.data(), static_cast<std::streamsize>(k.size()));
      put_raw<std::uint64_t>(os, v.size());
      os.write(v.data(), static_cast<std::streamsize>(v.size()));
    }
    if (!os) fail(Errc::io_error, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(Errc::io_error, "cannot move checkpoint into place: " + ec.message());
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(Errc::io_error, "cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    fail(Errc::invalid_state, path.string() + " is not a checkpoint");
  Archive a;
  const auto nt = get_raw<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < nt; ++i) {
    std::string name = get_string(is, get_raw<std::uint32_t>(is));
    const auto ndim = get_raw<std::uint32_t>(is);
    if (ndim > 8) fail(Errc::invalid_state, "checkpoint tensor rank implausible");
    ag::Shape shape;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const auto v = get_raw<std::int64_t>(is);
      if (v < 0 || v > (1LL << 31)) fail(Errc::invalid_state, "checkpoint dimension implausible");
      shape.push_back(static_cast<int>(v));
    }
    ag::Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!is) fail(Errc::invalid_state, "checkpoint truncated");
    a.put(name, std::move(t));
  }
  const auto nm = get_raw<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < nm; ++i) {
    std::string k = get_string(is, get_raw<std::uint32_t>(is));
    a.set_meta(k, get_string(is, get_raw<std::uint64_t>(is)));
  }
  return a;
}

}  // namespace tldg
