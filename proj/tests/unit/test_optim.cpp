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

#include "arfnet/errors.hpp"
#include "arfnet/optim.hpp"

namespace {

using namespace arfnet;

optim::ParamWalker walker(Param& p, const char* name = "p") {
  return [&p, name](const ParamVisitor& fn) { fn(name, p); };
}

TEST(Sgd, MomentumAndDecayRecurrence) {
  Param p(Tensor({2}, {1.0, -2.0}));
  optim::Sgd sgd({0.1, 0.9, 0.01});
  double w[2] = {1.0, -2.0}, buf[2] = {0, 0};
  const double g[2] = {0.5, 0.25};
  for (int step = 0; step < 4; ++step) {
    p.zero_grad();
    p.grad[0] = g[0];
    p.grad[1] = g[1];
    p.touched = true;
    sgd.step(walker(p));
    for (int i = 0; i < 2; ++i) {
      const double d = g[i] + 0.01 * w[i];
      buf[i] = 0.9 * buf[i] + d;
      w[i] -= 0.1 * buf[i];
      EXPECT_NEAR(p.value[i], w[i], 1e-15);
    }
  }
}

TEST(Sgd, UntouchedParamsLeftAlone) {
  Param p(Tensor({1}, {3.0}));
  optim::Sgd sgd({0.1, 0.9, 0.5});
  p.zero_grad();
  sgd.step(walker(p));
  EXPECT_EQ(p.value[0], 3.0);
}

TEST(Sgd, FrozenWithGradientIsContractViolation) {
  Param p(Tensor({1}, {3.0}));
  p.frozen = true;
  optim::Sgd sgd({});
  p.zero_grad();
  sgd.step(walker(p));
  EXPECT_EQ(p.value[0], 3.0);
  p.grad[0] = 1.0;
  p.touched = true;
  EXPECT_THROW(sgd.step(walker(p)), ContractViolation);
}

TEST(Sgd, BuffersRoundTripThroughArchive) {
  Param a(Tensor({1}, {1.0})), b(Tensor({1}, {1.0}));
  optim::Sgd sa({0.1, 0.9, 0.0}), sb({0.1, 0.9, 0.0});
  a.zero_grad();
  a.grad[0] = 1.0;
  a.touched = true;
  sa.step(walker(a));
  archive::Archive ar;
  sa.save(ar);
  sb.load(ar);
  b.value = a.value;
  for (Param* p : {&a, &b}) {
    p->zero_grad();
    p->grad[0] = 1.0;
    p->touched = true;
  }
  sa.step(walker(a));
  sb.step(walker(b));
  EXPECT_EQ(a.value[0], b.value[0]);
}

TEST(Sgd, InvalidConfig) {
  EXPECT_THROW(optim::Sgd({0.0, 0.9, 0.0}), ConfigError);
  EXPECT_THROW(optim::Sgd({0.1, -0.1, 0.0}), ConfigError);
  EXPECT_THROW(optim::Sgd({0.1, 0.9, -1.0}), ConfigError);
}

}  // namespace
