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

#include <string>
#include <vector>

#include "arfnet/layers.hpp"

// Attention extraction module: a squeeze-excite channel gate and an
// encoder-decoder spatial saliency map computed from one feature map.
namespace arfnet::aem {

/// 16 for wide maps (C >= 64), 4 otherwise.
std::size_t default_reduction(std::size_t channels);

struct AemParams {
  std::size_t channels = 0;
  std::size_t reduction = 0;

  // Channel path: avgpool -> Linear(C, C/r) -> ReLU -> Linear(C/r, C) -> sigmoid.
  Linear squeeze;
  Linear excite;

  // Spatial path, widths C/r, 2C/r (pooled), 4C/r, 2C/r (unpooled), C/r, C.
  Conv2d reduce;
  Conv2d enc1;
  BatchNorm2d enc1_bn;
  Conv2d enc2;
  BatchNorm2d enc2_bn;
  ConvTranspose2d dec1;
  BatchNorm2d dec1_bn;
  ConvTranspose2d dec2;
  BatchNorm2d dec2_bn;
  Conv2d expand;

  AemParams() = default;
  /// Throws ConfigError unless reduction divides channels.
  AemParams(std::size_t channels, std::size_t reduction, Rng& rng);

  void visit(const std::string& prefix, const ParamVisitor& fn);
  void visit_buffers(const std::string& prefix, const BufferVisitor& fn);
};

/// Validates a feature map against `params`: rank 4, matching C, H and W at
/// least 4 and even, all entries finite.
void check_feature_map(const Tensor& f, const AemParams& params);

struct ChannelAttentionVars {
  Var scaled;  // f * gate, same shape as f
  Var gate;    // (B, C), entries in (0, 1)
};
ChannelAttentionVars channel_attention(Graph& g, Var f, AemParams& params);

/// Spatial saliency, same shape as f, each (b, c) plane sums to 1. When
/// `stages` is given it receives the six stage outputs in order.
Var spatial_attention(Graph& g, Var f, AemParams& params, ops::BnMode mode,
                      std::vector<Var>* stages = nullptr);

struct AttentionVars {
  Var attended;  // spatial map * f * gate
  Var gate;      // channel attention vector
  Var spatial;   // saliency map alone
};
AttentionVars aem_forward(Graph& g, Var f, AemParams& params, ops::BnMode mode);

// Value-level entry points, each on a private graph.

struct ChannelAttention {
  Tensor scaled;
  Tensor attn;
};
ChannelAttention channel_attention(const Tensor& f, AemParams& params);

Tensor spatial_attention(const Tensor& f, AemParams& params,
                         ops::BnMode mode = ops::BnMode::kEval);

/// The six intermediate outputs of the spatial path.
std::vector<Tensor> spatial_attention_stages(const Tensor& f, AemParams& params,
                                             ops::BnMode mode = ops::BnMode::kEval);

struct AttentionOutput {
  Tensor attended;
  Tensor channel;
};
AttentionOutput aem_forward(const Tensor& f, AemParams& params,
                            ops::BnMode mode = ops::BnMode::kEval);

}  // namespace arfnet::aem
