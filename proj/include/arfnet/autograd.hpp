// Copyright 2026 The ARFNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "arfnet/tensor.hpp"

namespace arfnet {

/// A learnable array plus its accumulated gradient. Frozen parameters never
/// receive gradient and refuse optimizer updates.
struct Param {
  Tensor value;
  Tensor grad;
  bool frozen = false;
  /// Set when a backward pass reached this parameter since the last zero_grad.
  bool touched = false;

  Param() = default;
  explicit Param(Tensor v) : value(std::move(v)), grad(value.shape()) {}

  void zero_grad() {
    if (grad.shape() != value.shape()) grad = Tensor(value.shape());
    grad.fill(0.0);
    touched = false;
  }
};

/// Handle to a node of a Graph.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
  bool valid() const { return id != std::numeric_limits<std::size_t>::max(); }
};

/// Single-use reverse-mode tape. Nodes are appended in evaluation order, so
/// reverse insertion order is a valid topological order for backward.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, Var self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var param(Param& p);

  /// Appends an op result. `backward` runs only if some parent needs grad.
  Var emit(Tensor value, std::initializer_list<Var> parents,
           BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Gradient buffer, allocated as zeros on first access.
  Tensor& grad(Var v);
  bool has_grad(Var v) const { return !nodes_.at(v.id).grad.empty(); }

  /// Seeds d(loss)/d(node) for each pair, then propagates to every parameter
  /// reachable from the seeds. Parameter gradients are accumulated.
  void backward(std::span<const std::pair<Var, Tensor>> seeds);
  void backward(Var root, Tensor seed);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Param* param = nullptr;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

}  // namespace arfnet
