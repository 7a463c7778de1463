// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

// Minimal reverse-mode automatic differentiation over dense double tensors.
//
// Every backward rule is expressed with the same differentiable ops, so
// grad(..., create_graph = true) returns gradients that can themselves be
// differentiated. The gradient penalty on the discriminator relies on this.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tldg::ag {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, v); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double item() const;

  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

struct Node;

class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);
  static Var parameter(Tensor value);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const;
  Tensor& mutable_value();
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  bool requires_grad() const;
  double item() const { return value().item(); }
  Var detach() const { return constant(value()); }

  Node* node() const { return node_.get(); }

 private:
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend Var make_op(Tensor value, std::vector<Var> inputs,
                     std::function<std::vector<Var>(const Var&, const std::vector<bool>&)> backward);
};

// grad_out -> one gradient per input. Entries whose `needed` flag is false
// may be left undefined.
using BackwardFn = std::function<std::vector<Var>(const Var& grad_out, const std::vector<bool>& needed)>;

struct Node {
  Tensor value;
  std::vector<Var> inputs;
  BackwardFn backward;
  bool requires_grad = false;
};

// Records the op only if grad mode is on and some input requires grad.
Var make_op(Tensor value, std::vector<Var> inputs, BackwardFn backward);

bool grad_enabled();

class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool prev_;
};

class NoGradGuard : public GradModeGuard {
 public:
  NoGradGuard() : GradModeGuard(false) {}
};

// Gradients of `output` with respect to each of `wrt`. `seed` defaults to
// ones (so a non-scalar output is implicitly summed). Inputs that do not
// influence the output get zero tensors.
std::vector<Var> grad(const Var& output, const std::vector<Var>& wrt, bool create_graph = false,
                      const Var& seed = Var());

}  // namespace tldg::ag
