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
#include <random>
#include <string>

#include "arfnet/autograd.hpp"
#include "arfnet/ops.hpp"

namespace arfnet {

using Rng = std::mt19937_64;

using ParamVisitor = std::function<void(const std::string& name, Param& p)>;
using BufferVisitor = std::function<void(const std::string& name, Tensor& t)>;

/// He-normal weights, zero bias.
struct Conv2d {
  Param weight;  // (Cout, Cin, k, k)
  Param bias;    // (Cout)
  int stride = 1;
  int pad = 0;

  Conv2d() = default;
  Conv2d(std::size_t cin, std::size_t cout, std::size_t kernel, int stride,
         int pad, Rng& rng);

  Var operator()(Graph& g, Var x) {
    return ops::conv2d(g, x, g.param(weight), g.param(bias), stride, pad);
  }
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

struct ConvTranspose2d {
  Param weight;  // (Cin, Cout, k, k)
  Param bias;    // (Cout)
  int stride = 1;
  int pad = 0;

  ConvTranspose2d() = default;
  ConvTranspose2d(std::size_t cin, std::size_t cout, std::size_t kernel,
                  int stride, int pad, Rng& rng);

  Var operator()(Graph& g, Var x) {
    return ops::conv_transpose2d(g, x, g.param(weight), g.param(bias), stride, pad);
  }
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

struct BatchNorm2d {
  Param gamma;
  Param beta;
  ops::BnState state;

  BatchNorm2d() = default;
  explicit BatchNorm2d(std::size_t channels);

  Var operator()(Graph& g, Var x, ops::BnMode mode) {
    return ops::batch_norm(g, x, g.param(gamma), g.param(beta), state, mode);
  }
  void visit(const std::string& prefix, const ParamVisitor& fn);
  void visit_buffers(const std::string& prefix, const BufferVisitor& fn);
};

/// Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero bias.
struct Linear {
  Param weight;  // (out, in)
  Param bias;    // (out)

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);

  std::size_t in_features() const { return weight.value.dim(1); }
  std::size_t out_features() const { return weight.value.dim(0); }

  Var operator()(Graph& g, Var x) {
    return ops::linear(g, x, g.param(weight), g.param(bias));
  }
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

}  // namespace arfnet
