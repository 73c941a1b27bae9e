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

#include "arfnet/optim.hpp"

#include "arfnet/errors.hpp"

namespace arfnet::optim {

void SgdConfig::validate() const {
  ARFNET_CHECK_CONFIG(lr > 0.0, "optim: lr must be > 0");
  ARFNET_CHECK_CONFIG(momentum >= 0.0 && momentum < 1.0, "optim: momentum must lie in [0, 1)");
  ARFNET_CHECK_CONFIG(weight_decay >= 0.0, "optim: weight_decay must be >= 0");
}

Sgd::Sgd(SgdConfig config) : config_(config) { config_.validate(); }

void Sgd::step(const ParamWalker& walk) {
  walk([&](const std::string& name, Param& p) {
    if (p.frozen) {
      for (double g : p.grad.data()) {
        if (g != 0.0) throw ContractViolation("optim: frozen parameter '" + name + "' has a gradient");
      }
      return;
    }
    if (!p.touched) return;
    auto it = buffers_.find(name);
    if (it == buffers_.end()) it = buffers_.emplace(name, Tensor(p.value.shape())).first;
    Tensor& buf = it->second;
    if (buf.shape() != p.value.shape()) {
      throw ContractViolation("optim: momentum buffer for '" + name + "' has the wrong shape");
    }
    double* w = p.value.ptr();
    const double* gr = p.grad.ptr();
    double* b = buf.ptr();
    const double wd = config_.weight_decay, m = config_.momentum, lr = config_.lr;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = gr[i] + wd * w[i];
      b[i] = m * b[i] + g;
      w[i] -= lr * b[i];
    }
  });
}

void Sgd::save(archive::Archive& ar, const std::string& prefix) const {
  for (const auto& [name, buf] : buffers_) ar.put(prefix + name, buf);
}

void Sgd::load(const archive::Archive& ar, const std::string& prefix) {
  buffers_.clear();
  for (const auto& name : ar.names()) {
    if (name.rfind(prefix, 0) == 0) buffers_[name.substr(prefix.size())] = ar.tensor(name);
  }
}

}  // namespace arfnet::optim
