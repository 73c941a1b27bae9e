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

#include <gtest/gtest.h>

#include <cmath>

#include "arfnet/backbone.hpp"
#include "arfnet/errors.hpp"
#include "oracles.hpp"

namespace {

using namespace arfnet;
using backbone::BlockSpec;
using backbone::Model;
using oracle::randn;

BlockSpec small_spec() {
  BlockSpec s;
  s.channels = {8, 16};
  s.strides = {1, 2};
  s.input_size = 16;
  s.latent_dim = 12;
  s.num_classes = 3;
  return s;
}

oracle::Weights randomize(Model& m, Rng& rng) {
  oracle::Weights w;
  m.visit_params([&](const std::string& n, Param& p) {
    p.value = randn(p.value.shape(), rng, 0.3);
    w[n] = p.value;
  });
  m.visit_buffers([&](const std::string& n, Tensor& t) {
    t = n.ends_with("running_var") ? oracle::uniform(t.shape(), rng, 0.5, 1.5) : randn(t.shape(), rng, 0.1);
    w[n] = t;
  });
  return w;
}

oracle::NetRef reference(Model& m, const oracle::Weights& w, const Tensor& x) {
  const auto& s = m.spec();
  std::vector<bool> projected;
  for (std::size_t l = 0; l < s.num_blocks(); ++l) {
    projected.push_back(w.count("backbone/block" + std::to_string(l) + "/shortcut/weight") != 0);
  }
  return oracle::network(x, w, s.num_blocks(), s.strides, s.stem_stride, projected);
}

TEST(Spec, DefaultsValidate) {
  BlockSpec s;
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.num_blocks(), 4u);
  EXPECT_EQ(s.block_extent(0), 8u);
  EXPECT_EQ(s.block_extent(1), 4u);
  EXPECT_EQ(s.block_extent(3), 4u);
}

TEST(Spec, Violations) {
  BlockSpec s;
  s.channels = {16};
  s.strides = {1};
  EXPECT_THROW(s.validate(), ConfigError);
  s = BlockSpec();
  s.channels = {32, 16, 64, 128};
  EXPECT_THROW(s.validate(), ConfigError);
  s = BlockSpec();
  s.latent_dim = 3;
  EXPECT_THROW(s.validate(), ConfigError);
  s = BlockSpec();
  s.input_size = 20;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Spec, MetadataRoundTrip) {
  BlockSpec s = small_spec();
  s.reductions = {2, 4};
  EXPECT_EQ(BlockSpec::from_metadata(s.to_metadata()), s);
}

TEST(Forward, ShapeContract) {
  BlockSpec s;
  s.latent_dim = 64;
  Model m(s, 1);
  Rng rng(2);
  const auto t = m.forward(randn({2, 3, 32, 32}, rng));
  EXPECT_EQ(t.z.shape(), (Shape{2, 64}));
  EXPECT_EQ(t.logits.shape(), (Shape{2, 5}));
  ASSERT_EQ(t.layer_logits.size(), 4u);
  for (const auto& l : t.layer_logits) EXPECT_EQ(l.shape(), (Shape{2, 5}));
  EXPECT_EQ(t.fused.shape(), (Shape{2, 128, 4, 4}));
}

TEST(Forward, MatchesScalarNetworkOracle) {
  Rng rng(3);
  Model m(small_spec(), 4);
  const auto w = randomize(m, rng);
  const Tensor x = randn({2, 3, 16, 16}, rng);
  const auto got = m.forward(x);
  const auto want = reference(m, w, x);
  EXPECT_LT(max_abs_diff(got.fused, want.fused), 1e-5);
  EXPECT_LT(max_abs_diff(got.z, want.z), 1e-5);
  EXPECT_LT(max_abs_diff(got.logits, want.logits), 1e-5);
  for (std::size_t l = 0; l < 2; ++l) EXPECT_LT(max_abs_diff(got.layer_logits[l], want.layer_logits[l]), 1e-5);
}

TEST(Forward, DefaultSpecMatchesOracle) {
  Rng rng(5);
  Model m(BlockSpec{}, 6);
  const auto w = randomize(m, rng);
  const Tensor x = randn({1, 3, 32, 32}, rng);
  EXPECT_LT(max_abs_diff(m.forward(x).logits, reference(m, w, x).logits), 1e-5);
}

TEST(Forward, ZeroInputGivesZeroLatentAndBiasLogits) {
  Model m(small_spec(), 7);
  const Tensor bias({3}, {0.25, -1.0, 2.0});
  m.head().assign(m.head().weight(), bias);
  const auto t = m.forward(Tensor({2, 3, 16, 16}));
  for (double v : t.z.data()) EXPECT_EQ(v, 0.0);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(t.logits.at(b, k), bias[k]);
}

TEST(Forward, LatentRowsUnitNorm) {
  Rng rng(8);
  Model m(small_spec(), 9);
  randomize(m, rng);
  const auto t = m.forward(randn({5, 3, 16, 16}, rng, 2.0));
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0;
    for (double v : t.z.row(i)) s += v * v;
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-5);
  }
}

TEST(Forward, WrongExtentRejected) {
  Model m(small_spec(), 10);
  EXPECT_THROW(m.forward(Tensor({1, 3, 32, 32})), ConfigError);
  EXPECT_THROW(m.forward(Tensor({1, 1, 16, 16})), ConfigError);
}

TEST(Forward, SameSeedSameModel) {
  Model a(small_spec(), 11), b(small_spec(), 11);
  Rng rng(12);
  const Tensor x = randn({2, 3, 16, 16}, rng);
  EXPECT_EQ(a.forward(x).logits.storage(), b.forward(x).logits.storage());
}

TEST(Residual, DefaultSpecShape) {
  Model m(BlockSpec{}, 13);
  Rng rng(14);
  EXPECT_EQ(m.residual_connect(randn({3, 16, 8, 8}, rng), 0).shape(), (Shape{3, 32, 4, 4}));
  EXPECT_THROW(m.residual_connect(randn({3, 16, 8, 8}, rng), 3), ConfigError);
  EXPECT_THROW(m.residual_connect(randn({3, 8, 8, 8}, rng), 0), ConfigError);
}

TEST(Residual, MatchesStridedPointwiseOracle) {
  Model m(BlockSpec{}, 15);
  Rng rng(16);
  auto& r = m.residual(0);
  r.bias.value = randn(r.bias.value.shape(), rng);
  const Tensor x = randn({2, 16, 8, 8}, rng);
  const Tensor want = oracle::conv2d(x, r.weight.value, r.bias.value, 2, 0);
  EXPECT_LT(max_abs_diff(m.residual_connect(x, 0), want), 1e-9);
}

BlockSpec flat_spec() {
  BlockSpec s;
  s.channels = {8, 8, 8, 8};
  s.strides = {1, 1, 1, 1};
  s.input_size = 16;
  s.latent_dim = 8;
  s.num_classes = 3;
  return s;
}

void make_identity(Conv2d& c) {
  c.weight.value.fill(0.0);
  c.bias.value.fill(0.0);
  const std::size_t n = c.weight.value.dim(0);
  for (std::size_t i = 0; i < n; ++i) c.weight.value[i * n + i] = 1.0;
}

TEST(Residual, IdentityInitializedIsIdentity) {
  Model m(flat_spec(), 17);
  make_identity(m.residual(1));
  Rng rng(18);
  const Tensor x = randn({2, 8, 8, 8}, rng);
  EXPECT_EQ(m.residual_connect(x, 1).storage(), x.storage());
}

TEST(Fuse, Averages) {
  const Tensor a({1, 1, 2, 2}, 1.0), b({1, 1, 2, 2}, 3.0);
  const Tensor ab = backbone::fuse(a, b), bb = backbone::fuse(b, b);
  for (double v : ab.data()) EXPECT_EQ(v, 2.0);
  for (double v : bb.data()) EXPECT_EQ(v, 3.0);
  EXPECT_THROW(backbone::fuse(a, Tensor({1, 2, 2, 2})), ConfigError);
}

TEST(Fuse, Linear) {
  Rng rng(19);
  const Tensor a = randn({2, 3, 4, 4}, rng), b = randn({2, 3, 4, 4}, rng);
  EXPECT_LT(max_abs_diff(backbone::fuse(a * 2.5, b * 2.5), backbone::fuse(a, b) * 2.5), 1e-12);
}

TEST(Fuse, RecurrenceOverFourBlocks) {
  Model m(flat_spec(), 20);
  for (std::size_t l = 0; l < 3; ++l) make_identity(m.residual(l));
  const std::vector<double> v{4.0, -2.0, 7.0, 1.0};
  double expect = v[0];
  Tensor fused({1, 8, 8, 8}, v[0]);
  for (std::size_t l = 1; l < 4; ++l) {
    fused = backbone::fuse(m.residual_connect(fused, l - 1), Tensor({1, 8, 8, 8}, v[l]));
    expect = (expect + v[l]) / 2;
  }
  for (double x : fused.data()) EXPECT_DOUBLE_EQ(x, expect);
}

TEST(Classify, IdentityHead) {
  BlockSpec s = small_spec();
  s.latent_dim = 3;
  Model m(s, 21);
  Tensor w({3, 3});
  for (std::size_t i = 0; i < 3; ++i) w.at(i, i) = 1.0;
  m.head().assign(w, Tensor({3}));
  const auto p = m.classify(Tensor({1, 3}, {1, 0, 0}));
  EXPECT_EQ(p.storage(), (std::vector<double>{1, 0, 0}));
}

TEST(Classify, MatchesAffineOracle) {
  Rng rng(22);
  Model m(small_spec(), 23);
  m.head().assign(randn({3, 12}, rng), randn({3}, rng));
  const Tensor z = randn({4, 12}, rng);
  EXPECT_LT(max_abs_diff(m.classify(z), oracle::linear(z, m.head().weight(), m.head().bias())), 1e-12);
}

TEST(Head, FrozenRejectsAssign) {
  Model m(small_spec(), 24);
  m.head().freeze();
  EXPECT_TRUE(m.head().frozen());
  EXPECT_THROW(m.head().assign(m.head().weight(), m.head().bias()), ContractViolation);
}

TEST(Model, ParameterNamespaces) {
  Model m(small_spec(), 25);
  std::vector<std::string> names;
  m.visit_params([&](const std::string& n, Param&) { names.push_back(n); });
  ASSERT_GE(names.size(), 2u);
  EXPECT_EQ(names[names.size() - 2], "head/weight");
  EXPECT_EQ(names.back(), "head/bias");
  for (std::size_t i = 0; i + 2 < names.size(); ++i) EXPECT_TRUE(names[i].starts_with("backbone/")) << names[i];
}

}  // namespace
