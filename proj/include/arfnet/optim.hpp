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

#include <functional>
#include <map>
#include <string>

#include "arfnet/archive.hpp"
#include "arfnet/layers.hpp"

namespace arfnet::optim {

struct SgdConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-3;

  void validate() const;
};

/// Calls the visitor once per parameter, in a fixed order.
using ParamWalker = std::function<void(const ParamVisitor&)>;

/// Momentum SGD with coupled weight decay:
///   g = grad + wd * w;  buf = m * buf + g;  w -= lr * buf.
/// Parameters that received no gradient since their last zero_grad are left
/// alone (no decay, no momentum). A frozen parameter holding a nonzero
/// gradient raises ContractViolation.
class Sgd {
 public:
  explicit Sgd(SgdConfig config);

  void step(const ParamWalker& walk);

  const SgdConfig& config() const { return config_; }

  /// Momentum buffers under `prefix` + parameter name.
  void save(archive::Archive& ar, const std::string& prefix = "optim/") const;
  void load(const archive::Archive& ar, const std::string& prefix = "optim/");

 private:
  SgdConfig config_;
  std::map<std::string, Tensor> buffers_;
};

}  // namespace arfnet::optim
