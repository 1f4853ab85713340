/*
 * Copyright 2026 The dialseg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dialseg/tensor.hpp"

namespace dialseg {

// Reverse-mode automatic differentiation over tensors.
//
// Each operation records a node holding its forward value plus a closure that
// propagates the node's gradient into its parents. backward() runs the
// closures in reverse topological order, accumulating into leaf gradients.
// Traversal order is deterministic, so gradients are bit-reproducible.

template <typename T>
struct Node;

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  bool grad_alloc = false;
  const char* op = "leaf";
  std::vector<NodePtr<T>> parents;
  std::function<void(Node<T>&)> backprop;

  Tensor<T>& ensure_grad() {
    if (!grad_alloc) {
      grad = Tensor<T>(value.shape());
      grad_alloc = true;
    }
    return grad;
  }
};

/// Value-semantic handle to a graph node.
template <typename T>
class Var {
 public:
  Var() = default;

  explicit Var(Tensor<T> value, bool requires_grad = false) {
    node_ = std::make_shared<Node<T>>();
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  static Var leaf(Tensor<T> value, bool requires_grad = true) {
    return Var(std::move(value), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& value_mut() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad_alloc; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const NodePtr<T>& node() const { return node_; }

  size_t size() const { return node_->value.size(); }
  const std::vector<int>& shape() const { return node_->value.shape(); }

  T scalar_value() const {
    if (node_->value.size() != 1) throw InvalidArgument("scalar_value on non-scalar");
    return node_->value[0];
  }

  /// New leaf sharing this node's current values, cut off from the graph.
  Var detach() const { return Var(node_->value, false); }

  void zero_grad() {
    if (node_->grad_alloc) node_->grad.fill(T(0));
  }

  /// Backpropagate from this (scalar) node through the recorded graph.
  void backward() const {
    if (node_->value.size() != 1) throw InvalidArgument("backward requires a scalar root");
    // Iterative post-order DFS for a deterministic topological order.
    std::vector<Node<T>*> topo;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        Node<T>* p = n->parents[next++].get();
        if (p->requires_grad && !visited.count(p)) {
          visited.insert(p);
          stack.emplace_back(p, 0);
        }
      } else {
        topo.push_back(n);
        stack.pop_back();
      }
    }
    node_->ensure_grad();
    node_->grad[0] += T(1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
      Node<T>* n = *it;
      if (n->backprop && n->grad_alloc) n->backprop(*n);
    }
  }

 private:
  NodePtr<T> node_;
};

/// Record one operation node. requires_grad is inherited from the parents;
/// the backprop closure is dropped when no parent needs gradients.
template <typename T>
Var<T> make_var(Tensor<T> value, std::vector<Var<T>> parents, const char* op,
                std::function<void(Node<T>&)> backprop) {
  Var<T> out(std::move(value), false);
  Node<T>& n = *out.node();
  n.op = op;
  bool rg = false;
  for (const auto& p : parents) {
    rg = rg || p.requires_grad();
    n.parents.push_back(p.node());
  }
  n.requires_grad = rg;
  if (rg) n.backprop = std::move(backprop);
  return out;
}

/// Elementwise unary op: y_i = f(x_i), dy/dx_i = d(x_i, y_i).
template <typename T, typename F, typename D>
Var<T> unary_ew(const Var<T>& x, const char* op, F f, D d) {
  Tensor<T> out(x.shape());
  const Tensor<T>& xv = x.value();
  for (size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  auto xn = x.node();
  return make_var<T>(std::move(out), {x}, op, [xn, d](Node<T>& self) {
    if (!xn->requires_grad) return;
    Tensor<T>& gx = xn->ensure_grad();
    for (size_t i = 0; i < gx.size(); ++i)
      gx[i] += self.grad[i] * d(xn->value[i], self.value[i]);
  });
}

/// Elementwise binary op on same-shape tensors.
template <typename T, typename F, typename DA, typename DB>
Var<T> binary_ew(const Var<T>& a, const Var<T>& b, const char* op, F f, DA da, DB db) {
  require_same_shape(a.value(), b.value(), op);
  Tensor<T> out(a.shape());
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  for (size_t i = 0; i < av.size(); ++i) out[i] = f(av[i], bv[i]);
  auto an = a.node();
  auto bn = b.node();
  return make_var<T>(std::move(out), {a, b}, op, [an, bn, da, db](Node<T>& self) {
    if (an->requires_grad) {
      Tensor<T>& ga = an->ensure_grad();
      for (size_t i = 0; i < ga.size(); ++i)
        ga[i] += self.grad[i] * da(an->value[i], bn->value[i], self.value[i]);
    }
    if (bn->requires_grad) {
      Tensor<T>& gb = bn->ensure_grad();
      for (size_t i = 0; i < gb.size(); ++i)
        gb[i] += self.grad[i] * db(an->value[i], bn->value[i], self.value[i]);
    }
  });
}

}  // namespace dialseg
