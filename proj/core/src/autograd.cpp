// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/autograd.hpp"

#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "tldg/error.hpp"
#include "tldg/ops.hpp"

namespace tldg::ag {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != numel(shape_))
    fail(Errc::invalid_input, "tensor payload does not match shape " + shape_str(shape_));
}

double Tensor::item() const {
  if (data_.size() != 1) fail(Errc::invalid_input, "item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (numel(shape) != data_.size())
    fail(Errc::invalid_input, "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  return Tensor(std::move(shape), data_);
}

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

const Tensor& Var::value() const {
  if (!node_) fail(Errc::invalid_state, "use of an undefined Var");
  return node_->value;
}

Tensor& Var::mutable_value() {
  if (!node_) fail(Errc::invalid_state, "use of an undefined Var");
  return node_->value;
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

GradModeGuard::GradModeGuard(bool enabled) : prev_(g_grad_enabled) { g_grad_enabled = enabled; }
GradModeGuard::~GradModeGuard() { g_grad_enabled = prev_; }

Var make_op(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& in : inputs) any |= in.requires_grad();
    if (any) {
      n->requires_grad = true;
      n->inputs = std::move(inputs);
      n->backward = std::move(backward);
    }
  }
  return Var(std::move(n));
}

std::vector<Var> grad(const Var& output, const std::vector<Var>& wrt, bool create_graph,
                      const Var& seed) {
  std::vector<Var> result(wrt.size());
  std::unordered_set<const Node*> targets;
  for (const auto& w : wrt)
    if (w.defined()) targets.insert(w.node());

  // Iterative post-order DFS: inputs precede their consumers in `order`.
  std::vector<Node*> order;
  std::unordered_map<const Node*, bool> relevant;
  if (output.requires_grad()) {
    std::vector<std::pair<Node*, std::size_t>> stack{{output.node(), 0}};
    std::unordered_set<const Node*> visited{output.node()};
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        Node* child = node->inputs[next++].node();
        if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
        continue;
      }
      bool rel = targets.count(node) > 0;
      for (const auto& in : node->inputs) {
        auto it = relevant.find(in.node());
        rel |= it != relevant.end() && it->second;
      }
      relevant[node] = rel;
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_map<const Node*, Var> grads;
  {
    GradModeGuard mode(create_graph);
    if (output.requires_grad()) {
      grads[output.node()] = seed.defined() ? seed : Var::constant(Tensor(output.shape(), 1.0));
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (!relevant[node] || !node->backward) continue;
        auto g = grads.find(node);
        if (g == grads.end()) continue;
        std::vector<bool> needed(node->inputs.size());
        for (std::size_t i = 0; i < needed.size(); ++i) {
          const Node* in = node->inputs[i].node();
          auto r = relevant.find(in);
          needed[i] = in->requires_grad && r != relevant.end() && r->second;
        }
        Var gout = g->second;
        if (!create_graph && !targets.count(node)) grads.erase(g);
        std::vector<Var> gin = node->backward(gout, needed);
        for (std::size_t i = 0; i < gin.size(); ++i) {
          if (!needed[i] || !gin[i].defined()) continue;
          const Node* in = node->inputs[i].node();
          auto [slot, inserted] = grads.try_emplace(in, gin[i]);
          if (!inserted) slot->second = add(slot->second, gin[i]);
        }
      }
    }
  }

  for (std::size_t i = 0; i < wrt.size(); ++i) {
    if (!wrt[i].defined()) continue;
    auto it = grads.find(wrt[i].node());
    if (it != grads.end()) {
      result[i] = create_graph ? it->second : it->second.detach();
    } else {
      result[i] = Var::constant(Tensor(wrt[i].shape(), 0.0));
    }
  }
  return result;
}

}  // namespace tldg::ag
