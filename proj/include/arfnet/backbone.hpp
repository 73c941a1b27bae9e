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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "arfnet/aem.hpp"
#include "arfnet/layers.hpp"

namespace arfnet::backbone {

/// Shape of the residual backbone. Block l consumes block l-1's semantic map
/// and downsamples it by strides[l]; a stem conv runs first.
struct BlockSpec {
  std::vector<std::size_t> channels{16, 32, 64, 128};
  std::vector<std::size_t> strides{2, 2, 1, 1};
  /// Per-block AEM reduction ratio; empty means aem::default_reduction.
  std::vector<std::size_t> reductions;
  std::size_t stem_stride = 2;
  std::size_t input_channels = 3;
  std::size_t input_size = 32;
  std::size_t latent_dim = 128;
  std::size_t num_classes = 5;

  std::size_t num_blocks() const { return channels.size(); }
  std::size_t reduction(std::size_t block) const;
  /// Spatial extent of block `block`'s output.
  std::size_t block_extent(std::size_t block) const;

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;

  std::map<std::string, std::string> to_metadata() const;
  static BlockSpec from_metadata(const std::map<std::string, std::string>& kv);

  bool operator==(const BlockSpec&) const = default;
};

/// conv3x3(stride)-BN-ReLU-conv3x3-BN plus shortcut, then ReLU.
struct ResidualBlock {
  Conv2d conv1;
  BatchNorm2d bn1;
  Conv2d conv2;
  BatchNorm2d bn2;
  bool projected_shortcut = false;
  Conv2d shortcut;

  ResidualBlock() = default;
  ResidualBlock(std::size_t cin, std::size_t cout, std::size_t stride, Rng& rng);

  Var operator()(Graph& g, Var x, ops::BnMode mode);
  void visit(const std::string& prefix, const ParamVisitor& fn);
  void visit_buffers(const std::string& prefix, const BufferVisitor& fn);
};

/// The linear classifier over z. Once frozen, every update path throws.
class Head {
 public:
  Head() = default;
  Head(std::size_t latent_dim, std::size_t num_classes, Rng& rng);

  Var operator()(Graph& g, Var z) { return fc_(g, z); }

  void freeze();
  bool frozen() const { return frozen_; }

  /// Overwrites head weights; ContractViolation when frozen.
  void assign(const Tensor& weight, const Tensor& bias);

  const Tensor& weight() const { return fc_.weight.value; }
  const Tensor& bias() const { return fc_.bias.value; }
  void visit(const std::string& prefix, const ParamVisitor& fn) { fc_.visit(prefix, fn); }

 private:
  Linear fc_;
  bool frozen_ = false;
};

struct ForwardVars {
  Var z;                            // (B, d), unit rows
  Var logits;                       // (B, K)
  std::vector<Var> layer_logits;    // L x (B, K), projected channel gates
  Var fused;                        // final fused map
  std::vector<Var> gates;           // L x (B, C^l)
  std::vector<Var> spatial_maps;    // L x (B, C^l, H^l, W^l)
};

struct ForwardTrace {
  Tensor z;
  Tensor logits;
  std::vector<Tensor> layer_logits;
  Tensor fused;
  std::vector<Tensor> spatial_maps;
};

/// Attention-augmented residual network with parallel fusion stream, latent
/// projection, per-block gate projections and a classifier head.
///
/// Parameter names: `backbone/...` for everything trained during adaptation,
/// `head/weight` and `head/bias` for the classifier.
class Model {
 public:
  Model(const BlockSpec& spec, std::uint64_t seed);

  const BlockSpec& spec() const { return spec_; }

  ForwardVars forward(Graph& g, Var x, ops::BnMode mode);
  ForwardTrace forward(const Tensor& x, ops::BnMode mode = ops::BnMode::kEval);

  /// R: 1x1 conv taking the fused map of block `from_block` (0-based) to the
  /// width and extent of block from_block + 1.
  Var residual_connect(Graph& g, Var fused, std::size_t from_block);
  Tensor residual_connect(const Tensor& fused, std::size_t from_block);

  Var classify(Graph& g, Var z) { return head_(g, z); }
  Tensor classify(const Tensor& z);

  Head& head() { return head_; }
  const Head& head() const { return head_; }

  aem::AemParams& attention(std::size_t block) { return attention_.at(block); }
  Conv2d& residual(std::size_t from_block) { return residual_.at(from_block); }
  Linear& projection() { return projection_; }
  Linear& layer_head(std::size_t block) { return layer_heads_.at(block); }

  /// Visits every parameter in a fixed order with its archive name.
  void visit_params(const ParamVisitor& fn);
  /// Batch-norm running statistics.
  void visit_buffers(const BufferVisitor& fn);

  void zero_grad();

 private:
  BlockSpec spec_;
  Conv2d stem_;
  BatchNorm2d stem_bn_;
  std::vector<ResidualBlock> blocks_;
  std::vector<aem::AemParams> attention_;
  std::vector<Conv2d> residual_;
  Linear projection_;
  std::vector<Linear> layer_heads_;
  Head head_;
};

/// Cross-layer fusion: 0.5 * (a + b).
Var fuse(Graph& g, Var projected, Var next);
Tensor fuse(const Tensor& projected, const Tensor& next);

}  // namespace arfnet::backbone
