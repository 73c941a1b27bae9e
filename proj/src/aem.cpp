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

#include "arfnet/aem.hpp"

#include "arfnet/errors.hpp"

namespace arfnet::aem {

std::size_t default_reduction(std::size_t channels) {
  return channels >= 64 ? 16 : 4;
}

AemParams::AemParams(std::size_t c, std::size_t r, Rng& rng)
    : channels(c), reduction(r) {
  if (c == 0 || r == 0 || c % r != 0) {
    throw ConfigError("aem: reduction ratio " + std::to_string(r) +
                      " must divide channel count " + std::to_string(c));
  }
  const std::size_t w = c / r;
  squeeze = Linear(c, w, rng);
  excite = Linear(w, c, rng);
  reduce = Conv2d(c, w, 1, 1, 0, rng);
  enc1 = Conv2d(w, 2 * w, 3, 1, 1, rng);
  enc1_bn = BatchNorm2d(2 * w);
  enc2 = Conv2d(2 * w, 4 * w, 3, 1, 1, rng);
  enc2_bn = BatchNorm2d(4 * w);
  dec1 = ConvTranspose2d(4 * w, 2 * w, 3, 1, 1, rng);
  dec1_bn = BatchNorm2d(2 * w);
  dec2 = ConvTranspose2d(2 * w, w, 3, 1, 1, rng);
  dec2_bn = BatchNorm2d(w);
  expand = Conv2d(w, c, 1, 1, 0, rng);
}

void AemParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  squeeze.visit(prefix + "/channel/squeeze", fn);
  excite.visit(prefix + "/channel/excite", fn);
  reduce.visit(prefix + "/spatial/reduce", fn);
  enc1.visit(prefix + "/spatial/enc1", fn);
  enc1_bn.visit(prefix + "/spatial/enc1_bn", fn);
  enc2.visit(prefix + "/spatial/enc2", fn);
  enc2_bn.visit(prefix + "/spatial/enc2_bn", fn);
  dec1.visit(prefix + "/spatial/dec1", fn);
  dec1_bn.visit(prefix + "/spatial/dec1_bn", fn);
  dec2.visit(prefix + "/spatial/dec2", fn);
  dec2_bn.visit(prefix + "/spatial/dec2_bn", fn);
  expand.visit(prefix + "/spatial/expand", fn);
}

void AemParams::visit_buffers(const std::string& prefix, const BufferVisitor& fn) {
  enc1_bn.visit_buffers(prefix + "/spatial/enc1_bn", fn);
  enc2_bn.visit_buffers(prefix + "/spatial/enc2_bn", fn);
  dec1_bn.visit_buffers(prefix + "/spatial/dec1_bn", fn);
  dec2_bn.visit_buffers(prefix + "/spatial/dec2_bn", fn);
}

void check_feature_map(const Tensor& f, const AemParams& params) {
  if (f.rank() != 4 || f.dim(0) == 0) {
    throw ConfigError("aem: feature map must be (B, C, H, W), got " + shape_str(f.shape()));
  }
  if (f.dim(1) != params.channels) {
    throw ConfigError("aem: feature map has " + std::to_string(f.dim(1)) +
                      " channels, params are sized for " + std::to_string(params.channels));
  }
  if (f.dim(2) < 4 || f.dim(3) < 4 || f.dim(2) % 2 != 0 || f.dim(3) % 2 != 0) {
    throw ConfigError("aem: spatial extent " + shape_str(f.shape()) +
                      " must be at least 4x4 and even to survive pool/unpool");
  }
  if (!f.all_finite()) throw NumericError("aem: non-finite value in feature map");
}

ChannelAttentionVars channel_attention(Graph& g, Var f, AemParams& params) {
  check_feature_map(g.value(f), params);
  Var pooled = ops::global_avg_pool(g, f);
  Var hidden = ops::relu(g, params.squeeze(g, pooled));
  Var gate = ops::sigmoid(g, params.excite(g, hidden));
  return {ops::channel_scale(g, f, gate), gate};
}

Var spatial_attention(Graph& g, Var f, AemParams& params, ops::BnMode mode,
                      std::vector<Var>* stages) {
  check_feature_map(g.value(f), params);
  const std::size_t h = g.value(f).dim(2), w = g.value(f).dim(3);
  Var s1 = params.reduce(g, f);
  Var pre_pool = ops::relu(g, params.enc1_bn(g, params.enc1(g, s1), mode));
  ops::PoolResult pool = ops::max_pool2(g, pre_pool);
  Var s3 = ops::relu(g, params.enc2_bn(g, params.enc2(g, pool.out), mode));
  Var dec = ops::relu(g, params.dec1_bn(g, params.dec1(g, s3), mode));
  Var s4 = ops::max_unpool2(g, dec, pool, h, w);
  Var s5 = ops::relu(g, params.dec2_bn(g, params.dec2(g, s4), mode));
  Var s6 = ops::spatial_softmax(g, params.expand(g, s5));
  if (stages != nullptr) *stages = {s1, pool.out, s3, s4, s5, s6};
  return s6;
}

AttentionVars aem_forward(Graph& g, Var f, AemParams& params, ops::BnMode mode) {
  ChannelAttentionVars ch = channel_attention(g, f, params);
  Var spatial = spatial_attention(g, f, params, mode);
  return {ops::mul(g, spatial, ch.scaled), ch.gate, spatial};
}

ChannelAttention channel_attention(const Tensor& f, AemParams& params) {
  Graph g;
  auto out = channel_attention(g, g.constant(f), params);
  return {g.value(out.scaled), g.value(out.gate)};
}

Tensor spatial_attention(const Tensor& f, AemParams& params, ops::BnMode mode) {
  Graph g;
  return g.value(spatial_attention(g, g.constant(f), params, mode));
}

std::vector<Tensor> spatial_attention_stages(const Tensor& f, AemParams& params,
                                             ops::BnMode mode) {
  Graph g;
  std::vector<Var> stages;
  spatial_attention(g, g.constant(f), params, mode, &stages);
  std::vector<Tensor> out;
  for (Var v : stages) out.push_back(g.value(v));
  return out;
}

AttentionOutput aem_forward(const Tensor& f, AemParams& params, ops::BnMode mode) {
  Graph g;
  auto out = aem_forward(g, g.constant(f), params, mode);
  return {g.value(out.attended), g.value(out.gate)};
}

}  // namespace arfnet::aem
