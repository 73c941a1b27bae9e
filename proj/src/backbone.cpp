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

#include "arfnet/backbone.hpp"

#include <sstream>

#include "arfnet/errors.hpp"

namespace arfnet::backbone {
namespace {

std::string join(const std::vector<std::size_t>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::size_t parse_size(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size() || v < 0) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("backbone: metadata '" + key + "' is not a count: '" + s + "'");
  }
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& s) {
  std::vector<std::size_t> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(key, item));
  return out;
}

const std::string& require_key(const std::map<std::string, std::string>& kv,
                               const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("backbone: missing metadata key '" + key + "'");
  return it->second;
}

}  // namespace

std::size_t BlockSpec::reduction(std::size_t block) const {
  if (!reductions.empty()) return reductions.at(block);
  return aem::default_reduction(channels.at(block));
}

std::size_t BlockSpec::block_extent(std::size_t block) const {
  std::size_t extent = input_size / stem_stride;
  for (std::size_t l = 0; l <= block; ++l) extent /= strides.at(l);
  return extent;
}

void BlockSpec::validate() const {
  const std::size_t n = channels.size();
  ARFNET_CHECK_CONFIG(n >= 2, "backbone: at least 2 blocks required, got " + std::to_string(n));
  ARFNET_CHECK_CONFIG(strides.size() == n, "backbone: strides has " +
                                               std::to_string(strides.size()) +
                                               " entries for " + std::to_string(n) + " blocks");
  ARFNET_CHECK_CONFIG(reductions.empty() || reductions.size() == n,
                      "backbone: reductions must be empty or one per block");
  ARFNET_CHECK_CONFIG(num_classes >= 2, "backbone: num_classes must be at least 2");
  ARFNET_CHECK_CONFIG(latent_dim >= num_classes,
                      "backbone: latent_dim must be >= num_classes");
  ARFNET_CHECK_CONFIG(input_channels >= 1, "backbone: input_channels must be positive");
  ARFNET_CHECK_CONFIG(stem_stride >= 1, "backbone: stem_stride must be positive");
  std::size_t extent = input_size;
  ARFNET_CHECK_CONFIG(extent % stem_stride == 0,
                      "backbone: input_size not divisible by stem_stride");
  extent /= stem_stride;
  for (std::size_t l = 0; l < n; ++l) {
    const std::string where = "backbone: block " + std::to_string(l);
    ARFNET_CHECK_CONFIG(channels[l] >= 1, where + " has zero channels");
    ARFNET_CHECK_CONFIG(l == 0 || channels[l] >= channels[l - 1],
                        where + " channel count decreases");
    ARFNET_CHECK_CONFIG(strides[l] >= 1 && extent % strides[l] == 0,
                        where + " stride does not divide its input extent");
    extent /= strides[l];
    ARFNET_CHECK_CONFIG(extent >= 4 && extent % 2 == 0,
                        where + " output extent " + std::to_string(extent) +
                            " is below 4 or odd");
    const std::size_t r = reduction(l);
    ARFNET_CHECK_CONFIG(r >= 1 && channels[l] % r == 0,
                        where + " reduction " + std::to_string(r) + " does not divide " +
                            std::to_string(channels[l]) + " channels");
  }
}

std::map<std::string, std::string> BlockSpec::to_metadata() const {
  return {
      {"spec.channels", join(channels)},
      {"spec.strides", join(strides)},
      {"spec.reductions", join(reductions)},
      {"spec.stem_stride", std::to_string(stem_stride)},
      {"spec.input_channels", std::to_string(input_channels)},
      {"spec.input_size", std::to_string(input_size)},
      {"spec.latent_dim", std::to_string(latent_dim)},
      {"spec.num_classes", std::to_string(num_classes)},
  };
}

BlockSpec BlockSpec::from_metadata(const std::map<std::string, std::string>& kv) {
  BlockSpec s;
  s.channels = parse_list("spec.channels", require_key(kv, "spec.channels"));
  s.strides = parse_list("spec.strides", require_key(kv, "spec.strides"));
  s.reductions = parse_list("spec.reductions", require_key(kv, "spec.reductions"));
  s.stem_stride = parse_size("spec.stem_stride", require_key(kv, "spec.stem_stride"));
  s.input_channels = parse_size("spec.input_channels", require_key(kv, "spec.input_channels"));
  s.input_size = parse_size("spec.input_size", require_key(kv, "spec.input_size"));
  s.latent_dim = parse_size("spec.latent_dim", require_key(kv, "spec.latent_dim"));
  s.num_classes = parse_size("spec.num_classes", require_key(kv, "spec.num_classes"));
  s.validate();
  return s;
}

ResidualBlock::ResidualBlock(std::size_t cin, std::size_t cout, std::size_t stride, Rng& rng)
    : conv1(cin, cout, 3, static_cast<int>(stride), 1, rng),
      bn1(cout),
      conv2(cout, cout, 3, 1, 1, rng),
      bn2(cout),
      projected_shortcut(cin != cout || stride != 1) {
  if (projected_shortcut) shortcut = Conv2d(cin, cout, 1, static_cast<int>(stride), 0, rng);
}

Var ResidualBlock::operator()(Graph& g, Var x, ops::BnMode mode) {
  Var h = ops::relu(g, bn1(g, conv1(g, x), mode));
  h = bn2(g, conv2(g, h), mode);
  Var skip = projected_shortcut ? shortcut(g, x) : x;
  return ops::relu(g, ops::add(g, h, skip));
}

void ResidualBlock::visit(const std::string& prefix, const ParamVisitor& fn) {
  conv1.visit(prefix + "/conv1", fn);
  bn1.visit(prefix + "/bn1", fn);
  conv2.visit(prefix + "/conv2", fn);
  bn2.visit(prefix + "/bn2", fn);
  if (projected_shortcut) shortcut.visit(prefix + "/shortcut", fn);
}

void ResidualBlock::visit_buffers(const std::string& prefix, const BufferVisitor& fn) {
  bn1.visit_buffers(prefix + "/bn1", fn);
  bn2.visit_buffers(prefix + "/bn2", fn);
}

Head::Head(std::size_t latent_dim, std::size_t num_classes, Rng& rng)
    : fc_(latent_dim, num_classes, rng) {}

void Head::freeze() {
  frozen_ = true;
  fc_.weight.frozen = true;
  fc_.bias.frozen = true;
}

void Head::assign(const Tensor& weight, const Tensor& bias) {
  if (frozen_) throw ContractViolation("backbone: attempted update of the frozen classifier head");
  if (weight.shape() != fc_.weight.value.shape() || bias.shape() != fc_.bias.value.shape()) {
    throw ConfigError("backbone: head assignment shape mismatch");
  }
  fc_.weight.value = weight;
  fc_.bias.value = bias;
}

Model::Model(const BlockSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  Rng rng(seed);
  const std::size_t n = spec_.num_blocks();
  stem_ = Conv2d(spec_.input_channels, spec_.channels[0], 3,
                 static_cast<int>(spec_.stem_stride), 1, rng);
  stem_bn_ = BatchNorm2d(spec_.channels[0]);
  for (std::size_t l = 0; l < n; ++l) {
    const std::size_t cin = l == 0 ? spec_.channels[0] : spec_.channels[l - 1];
    blocks_.emplace_back(cin, spec_.channels[l], spec_.strides[l], rng);
    attention_.emplace_back(spec_.channels[l], spec_.reduction(l), rng);
  }
  for (std::size_t l = 0; l + 1 < n; ++l) {
    residual_.emplace_back(spec_.channels[l], spec_.channels[l + 1], 1,
                           static_cast<int>(spec_.strides[l + 1]), 0, rng);
  }
  projection_ = Linear(spec_.channels.back(), spec_.latent_dim, rng);
  for (std::size_t l = 0; l < n; ++l) {
    layer_heads_.emplace_back(spec_.channels[l], spec_.num_classes, rng);
  }
  head_ = Head(spec_.latent_dim, spec_.num_classes, rng);
}

Var Model::residual_connect(Graph& g, Var fused, std::size_t from_block) {
  if (from_block + 1 >= spec_.num_blocks()) {
    throw ConfigError("backbone: residual_connect from block " + std::to_string(from_block) +
                      " has no successor");
  }
  const Tensor& v = g.value(fused);
  if (v.rank() != 4 || v.dim(1) != spec_.channels[from_block] ||
      v.dim(2) != spec_.block_extent(from_block)) {
    throw ConfigError("backbone: residual_connect input " + shape_str(v.shape()) +
                      " does not match block " + std::to_string(from_block));
  }
  return residual_[from_block](g, fused);
}

Tensor Model::residual_connect(const Tensor& fused, std::size_t from_block) {
  Graph g;
  return g.value(residual_connect(g, g.constant(fused), from_block));
}

Tensor Model::classify(const Tensor& z) {
  if (z.rank() != 2 || z.dim(1) != spec_.latent_dim) {
    throw ConfigError("backbone: classify expects (B, " + std::to_string(spec_.latent_dim) +
                      "), got " + shape_str(z.shape()));
  }
  Graph g;
  return g.value(head_(g, g.constant(z)));
}

ForwardVars Model::forward(Graph& g, Var x, ops::BnMode mode) {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 4 || xv.dim(0) == 0 || xv.dim(1) != spec_.input_channels ||
      xv.dim(2) != spec_.input_size || xv.dim(3) != spec_.input_size) {
    throw ConfigError("backbone: input " + shape_str(xv.shape()) + " incompatible with (B, " +
                      std::to_string(spec_.input_channels) + ", " +
                      std::to_string(spec_.input_size) + ", " +
                      std::to_string(spec_.input_size) + ")");
  }
  if (!xv.all_finite()) throw NumericError("backbone: non-finite input image");

  ForwardVars out;
  Var h = ops::relu(g, stem_bn_(g, stem_(g, x), mode));
  Var fused;
  for (std::size_t l = 0; l < spec_.num_blocks(); ++l) {
    Var f = blocks_[l](g, h, mode);
    aem::AttentionVars att = aem::aem_forward(g, f, attention_[l], mode);
    Var fbar = ops::add(g, att.attended, f);
    fused = l == 0 ? fbar : fuse(g, residual_connect(g, fused, l - 1), fbar);
    out.gates.push_back(att.gate);
    out.spatial_maps.push_back(att.spatial);
    out.layer_logits.push_back(layer_heads_[l](g, att.gate));
    h = f;
  }
  out.fused = fused;
  Var latent = projection_(g, ops::global_avg_pool(g, fused));
  out.z = ops::l2_normalize_rows(g, latent);
  out.logits = head_(g, out.z);
  return out;
}

ForwardTrace Model::forward(const Tensor& x, ops::BnMode mode) {
  Graph g;
  ForwardVars v = forward(g, g.constant(x), mode);
  ForwardTrace t{g.value(v.z), g.value(v.logits), {}, g.value(v.fused), {}};
  for (Var l : v.layer_logits) t.layer_logits.push_back(g.value(l));
  for (Var s : v.spatial_maps) t.spatial_maps.push_back(g.value(s));
  return t;
}

void Model::visit_params(const ParamVisitor& fn) {
  stem_.visit("backbone/stem", fn);
  stem_bn_.visit("backbone/stem_bn", fn);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const std::string id = std::to_string(l);
    blocks_[l].visit("backbone/block" + id, fn);
    attention_[l].visit("backbone/aem" + id, fn);
  }
  for (std::size_t l = 0; l < residual_.size(); ++l) {
    residual_[l].visit("backbone/residual" + std::to_string(l), fn);
  }
  projection_.visit("backbone/projection", fn);
  for (std::size_t l = 0; l < layer_heads_.size(); ++l) {
    layer_heads_[l].visit("backbone/layer_head" + std::to_string(l), fn);
  }
  head_.visit("head", fn);
}

void Model::visit_buffers(const BufferVisitor& fn) {
  stem_bn_.visit_buffers("backbone/stem_bn", fn);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const std::string id = std::to_string(l);
    blocks_[l].visit_buffers("backbone/block" + id, fn);
    attention_[l].visit_buffers("backbone/aem" + id, fn);
  }
}

void Model::zero_grad() {
  visit_params([](const std::string&, Param& p) { p.zero_grad(); });
}

Var fuse(Graph& g, Var projected, Var next) {
  if (g.value(projected).shape() != g.value(next).shape()) {
    throw ConfigError("backbone: fuse shape mismatch " + shape_str(g.value(projected).shape()) +
                      " vs " + shape_str(g.value(next).shape()));
  }
  return ops::scale(g, ops::add(g, projected, next), 0.5);
}

Tensor fuse(const Tensor& projected, const Tensor& next) {
  Graph g;
  return g.value(fuse(g, g.constant(projected), g.constant(next)));
}

}  // namespace arfnet::backbone
