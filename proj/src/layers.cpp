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

#include "arfnet/layers.hpp"

#include <cmath>

namespace arfnet {
namespace {

Tensor he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

Conv2d::Conv2d(std::size_t cin, std::size_t cout, std::size_t kernel,
               int stride_, int pad_, Rng& rng)
    : weight(he_normal({cout, cin, kernel, kernel}, cin * kernel * kernel, rng)),
      bias(Tensor({cout})),
      stride(stride_),
      pad(pad_) {}

void Conv2d::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + "/weight", weight);
  fn(prefix + "/bias", bias);
}

ConvTranspose2d::ConvTranspose2d(std::size_t cin, std::size_t cout,
                                 std::size_t kernel, int stride_, int pad_,
                                 Rng& rng)
    : weight(he_normal({cin, cout, kernel, kernel}, cin * kernel * kernel, rng)),
      bias(Tensor({cout})),
      stride(stride_),
      pad(pad_) {}

void ConvTranspose2d::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + "/weight", weight);
  fn(prefix + "/bias", bias);
}

BatchNorm2d::BatchNorm2d(std::size_t channels)
    : gamma(Tensor({channels}, 1.0)), beta(Tensor({channels})) {
  state.running_mean = Tensor({channels});
  state.running_var = Tensor({channels}, 1.0);
}

void BatchNorm2d::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + "/gamma", gamma);
  fn(prefix + "/beta", beta);
}

void BatchNorm2d::visit_buffers(const std::string& prefix, const BufferVisitor& fn) {
  fn(prefix + "/running_mean", state.running_mean);
  fn(prefix + "/running_var", state.running_var);
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight(Tensor({out, in})), bias(Tensor({out})) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : weight.value.data()) v = dist(rng);
}

void Linear::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + "/weight", weight);
  fn(prefix + "/bias", bias);
}

}  // namespace arfnet
