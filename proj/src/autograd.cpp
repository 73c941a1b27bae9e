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

#include "arfnet/autograd.hpp"

#include "arfnet/errors.hpp"

namespace arfnet {

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
  return Var{nodes_.size() - 1};
}

Var Graph::param(Param& p) {
  nodes_.push_back(Node{p.value, {}, !p.frozen, &p, {}});
  return Var{nodes_.size() - 1};
}

Var Graph::emit(Tensor value, std::initializer_list<Var> parents,
                BackwardFn backward) {
  bool needs = false;
  for (Var p : parents) needs = needs || nodes_.at(p.id).requires_grad;
  nodes_.push_back(
      Node{std::move(value), {}, needs, nullptr, needs ? std::move(backward) : BackwardFn{}});
  return Var{nodes_.size() - 1};
}

Tensor& Graph::grad(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Graph::backward(std::span<const std::pair<Var, Tensor>> seeds) {
  for (const auto& [v, seed] : seeds) {
    if (seed.shape() != value(v).shape()) {
      throw ConfigError("autograd: seed shape " + shape_str(seed.shape()) +
                        " does not match node shape " +
                        shape_str(value(v).shape()));
    }
    if (!requires_grad(v)) continue;
    grad(v) += seed;
  }
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.requires_grad) continue;
    if (n.backward) n.backward(*this, Var{i});
    if (n.param != nullptr && !n.param->frozen) {
      if (n.param->grad.shape() != n.param->value.shape()) n.param->zero_grad();
      n.param->grad += n.grad;
      n.param->touched = true;
    }
  }
}

void Graph::backward(Var root, Tensor seed) {
  std::pair<Var, Tensor> s{root, std::move(seed)};
  backward(std::span<const std::pair<Var, Tensor>>(&s, 1));
}

}  // namespace arfnet
