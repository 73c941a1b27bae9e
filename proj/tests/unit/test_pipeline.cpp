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
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unistd.h>

#include "arfnet/errors.hpp"
#include "arfnet/losses.hpp"
#include "arfnet/optim.hpp"
#include "arfnet/pipeline.hpp"
#include "oracles.hpp"

namespace {

using namespace arfnet;
using namespace arfnet::pipeline;
namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("arfnet_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

BlockSpec toy_spec(std::size_t k) {
  BlockSpec s;
  s.channels = {8, 16};
  s.strides = {1, 2};
  s.input_size = 16;
  s.latent_dim = 16;
  s.num_classes = k;
  return s;
}

data::DomainPair toy_pair(std::size_t k, std::size_t per_class, std::uint64_t seed = 0) {
  data::DomainSpec d;
  d.num_classes = k;
  d.samples_per_class = per_class;
  d.image_size = 16;
  d.seed = seed;
  return data::gen_domain_pair(d);
}

TrainConfig toy_config(std::size_t epochs, std::size_t batch, double lr) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = batch;
  c.lr = lr;
  return c;
}

Dataset unlabeled(Dataset d) {
  d.labels.reset();
  return d;
}

/// A small pretrained source model shared by the adaptation tests.
const Model& source_model() {
  static const Model m = pretrain_source(toy_pair(3, 8).source, toy_spec(3), toy_config(6, 8, 0.1));
  return m;
}

/// Class 0 is brighter on the left half, class 1 on the right; the half-mean difference separates them.
Dataset halves(std::size_t per_class, std::uint64_t seed) {
  oracle::Rng rng(seed);
  std::uniform_real_distribution<double> noise(0.0, 0.4);
  Dataset d;
  d.images = Tensor({2 * per_class, 3, 16, 16});
  d.labels.emplace();
  d.class_names = {"left", "right"};
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const std::size_t y = i % 2;
    d.labels->push_back(y);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t q = 0; q < 16; ++q) {
          const bool lit = (q < 8) == (y == 0);
          d.images[((i * 3 + c) * 16 + r) * 16 + q] = (lit ? 0.6 : 0.0) + noise(rng);
        }
  }
  return d;
}

TEST(Pretrain, SeparableTwoClassSetReachesNinetyNine) {
  const Dataset d = halves(24, 1);
  Model m = pretrain_source(d, toy_spec(2), toy_config(20, 8, 0.02));
  EXPECT_GE(evaluate(m, d).accuracy, 0.99);
}

TEST(Pretrain, LayerHeadFittingLeavesOtherParametersAlone) {
  const auto pair = toy_pair(2, 6);
  auto cfg = toy_config(2, 4, 0.05);
  Model fitted = pretrain_source(pair.source, toy_spec(2), cfg);
  cfg.fit_layer_heads = false;
  Model plain = pretrain_source(pair.source, toy_spec(2), cfg);
  std::map<std::string, std::vector<double>> a;
  fitted.visit_params([&](const std::string& n, Param& p) { a[n] = p.value.storage(); });
  std::size_t heads_moved = 0;
  plain.visit_params([&](const std::string& n, Param& p) {
    if (n.find("layer_head") != std::string::npos) {
      heads_moved += a[n] != p.value.storage();
    } else {
      EXPECT_EQ(a[n], p.value.storage()) << n;
    }
  });
  EXPECT_GT(heads_moved, 0u);
}

TEST(Pretrain, CropAugmentationIsSeededAndActive) {
  const auto pair = toy_pair(2, 6);
  auto cfg = toy_config(2, 4, 0.05);
  const auto bytes = [&] {
    Model m = pretrain_source(pair.source, toy_spec(2), cfg);
    return to_checkpoint(m).serialize();
  };
  const auto plain = bytes();
  cfg.min_crop = 0.5;
  const auto a = bytes();
  EXPECT_EQ(a, bytes());
  EXPECT_NE(a, plain);
  for (double bad : {0.0, 1.5}) {
    cfg.min_crop = bad;
    EXPECT_THROW(cfg.validate(), ConfigError);
  }
}

TEST(Pretrain, LossNonIncreasingAtSmallStep) {
  const auto pair = toy_pair(2, 8);
  std::vector<double> losses;
  RunOptions o;
  o.on_epoch = [&](const EpochSummary& s, Model&) { losses.push_back(s.mean.total); };
  pretrain_source(pair.source, toy_spec(2), toy_config(12, 16, 1e-3), o);
  ASSERT_EQ(losses.size(), 12u);
  for (std::size_t i = 1; i < losses.size(); ++i) EXPECT_LE(losses[i], losses[i - 1] + 1e-6) << i;
}

TEST(Pretrain, ResumeIsBitIdentical) {
  TempDir dir;
  const auto pair = toy_pair(2, 6);
  auto cfg = toy_config(4, 5, 0.05);
  cfg.min_crop = 0.5;
  RunOptions full;
  full.metrics_csv = dir / "full.csv";
  Model a = pretrain_source(pair.source, toy_spec(2), cfg, full);

  RunOptions first;
  first.metrics_csv = dir / "part.csv";
  first.state_path = dir / "state.arc";
  first.stop_after_epochs = 2;
  pretrain_source(pair.source, toy_spec(2), cfg, first);
  RunOptions rest = first;
  rest.stop_after_epochs.reset();
  rest.resume_from = dir / "state.arc";
  Model b = pretrain_source(pair.source, toy_spec(2), cfg, rest);

  EXPECT_EQ(to_checkpoint(a).serialize(), to_checkpoint(b).serialize());
  EXPECT_EQ(slurp(dir / "full.csv"), slurp(dir / "part.csv"));
}

TEST(Pretrain, RejectsMismatchedOrUnlabeledData) {
  const auto pair = toy_pair(2, 2);
  EXPECT_THROW(pretrain_source(pair.source, toy_spec(3), toy_config(1, 4, 0.1)), ConfigError);
  EXPECT_THROW(pretrain_source(unlabeled(pair.source), toy_spec(2), toy_config(1, 4, 0.1)), ConfigError);
  auto big = toy_spec(2);
  big.input_size = 32;
  EXPECT_THROW(pretrain_source(pair.source, big, toy_config(1, 4, 0.1)), ConfigError);
}

TEST(Pretrain, MetricsCsvColumns) {
  TempDir dir;
  RunOptions o;
  o.metrics_csv = dir / "m.csv";
  pretrain_source(toy_pair(2, 2).source, toy_spec(2), toy_config(2, 2, 0.01), o);
  std::ifstream in(dir / "m.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "step,epoch,im,ce,kd,gac,total");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 4u);
}

TEST(Adapt, ZeroEpochsEqualsSource) {
  const auto pair = toy_pair(3, 8);
  Model src = source_model();
  Model out = adapt(src, unlabeled(pair.target), toy_config(0, 8, 0.01));
  EXPECT_EQ(predict(out, pair.target.images), predict(src, pair.target.images));
  const auto ms = evaluate(src, pair.target), mo = evaluate(out, pair.target);
  EXPECT_EQ(ms.accuracy, mo.accuracy);
  EXPECT_EQ(ms.confusion, mo.confusion);
}

TEST(Adapt, HeadBytesUnchanged) {
  const auto pair = toy_pair(3, 8);
  const auto before = head_bytes(source_model());
  auto cfg = toy_config(2, 8, 0.05);
  Model out = adapt(source_model(), unlabeled(pair.target), cfg);
  EXPECT_EQ(head_bytes(out), before);
  EXPECT_TRUE(out.head().frozen());
}

TEST(Adapt, HeadDriftIsContractViolation) {
  const auto pair = toy_pair(3, 8);
  RunOptions o;
  o.on_epoch = [](const EpochSummary&, Model& m) {
    m.visit_params([](const std::string& n, Param& p) {
      if (n == "head/bias") p.value[0] += 1e-12;
    });
  };
  EXPECT_THROW(adapt(source_model(), unlabeled(pair.target), toy_config(1, 8, 0.01), o), ContractViolation);
}

TEST(Adapt, ZeroWeightsReduceToInformationMaximization) {
  const auto pair = toy_pair(3, 8);
  const std::size_t n = pair.target.size();
  auto cfg = toy_config(3, n, 0.05);
  cfg.weights = {0.0, 0.0};
  Model got = adapt(source_model(), unlabeled(pair.target), cfg);

  Model ref = source_model();
  ref.head().freeze();
  optim::Sgd sgd({cfg.lr, cfg.momentum, cfg.weight_decay});
  const Tensor x = data::normalize(pair.target.images);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    Graph g;
    const auto f = ref.forward(g, g.constant(x), ops::BnMode::kTrain);
    const auto im = losses::im_loss(g.value(f.logits));
    ref.zero_grad();
    g.backward(f.logits, im.grad);
    sgd.step([&](const ParamVisitor& fn) { ref.visit_params(fn); });
  }
  EXPECT_LT(max_abs_diff(infer(got, pair.target.images).logits, infer(ref, pair.target.images).logits), 1e-8);
}

TEST(Adapt, ResumeIsBitIdentical) {
  TempDir dir;
  const auto target = unlabeled(toy_pair(3, 8).target);
  auto cfg = toy_config(3, 8, 0.02);
  RunOptions full;
  full.metrics_csv = dir / "full.csv";
  full.centroid_csv = dir / "full_c.csv";
  Model a = adapt(source_model(), target, cfg, full);

  RunOptions first;
  first.metrics_csv = dir / "part.csv";
  first.centroid_csv = dir / "part_c.csv";
  first.state_path = dir / "state.arc";
  first.stop_after_epochs = 1;
  adapt(source_model(), target, cfg, first);
  RunOptions rest = first;
  rest.stop_after_epochs.reset();
  rest.resume_from = dir / "state.arc";
  Model b = adapt(source_model(), target, cfg, rest);

  EXPECT_EQ(to_checkpoint(a).serialize(), to_checkpoint(b).serialize());
  EXPECT_EQ(slurp(dir / "full.csv"), slurp(dir / "part.csv"));
  EXPECT_EQ(slurp(dir / "full_c.csv"), slurp(dir / "part_c.csv"));
}

TEST(Adapt, ResumeWithChangedConfigRejected) {
  TempDir dir;
  const auto target = unlabeled(toy_pair(3, 4).target);
  RunOptions first;
  first.state_path = dir / "state.arc";
  adapt(source_model(), target, toy_config(1, 4, 0.02), first);
  RunOptions rest;
  rest.resume_from = dir / "state.arc";
  auto changed = toy_config(2, 4, 0.02);
  changed.tau = 0.5;
  EXPECT_THROW(adapt(source_model(), target, changed, rest), ConfigError);
}

TEST(Adapt, IdenticalRunsWriteIdenticalMetrics) {
  TempDir dir;
  const auto target = unlabeled(toy_pair(3, 8).target);
  for (const char* name : {"a.csv", "b.csv"}) {
    RunOptions o;
    o.metrics_csv = dir / name;
    adapt(source_model(), target, toy_config(2, 8, 0.02), o);
  }
  EXPECT_FALSE(slurp(dir / "a.csv").empty());
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
}

TEST(Adapt, CentroidsRecomputedOncePerEpoch) {
  TempDir dir;
  RunOptions o;
  o.centroid_csv = dir / "c.csv";
  std::size_t epochs_seen = 0;
  o.on_epoch = [&](const EpochSummary& s, Model&) {
    ++epochs_seen;
    EXPECT_EQ(s.steps, 3u);
  };
  adapt(source_model(), unlabeled(toy_pair(3, 8).target), toy_config(3, 10, 0.02), o);
  EXPECT_EQ(epochs_seen, 3u);
  std::ifstream in(dir / "c.csv");
  std::string line;
  std::getline(in, line);
  std::map<int, int> rows_per_epoch;
  while (std::getline(in, line)) ++rows_per_epoch[std::stoi(line.substr(0, line.find(',')))];
  EXPECT_EQ(rows_per_epoch, (std::map<int, int>{{1, 3}, {2, 3}, {3, 3}}));
}

TEST(Adapt, BankHoldsLastGlobalForwardOfEverySample) {
  TempDir dir;
  const auto target = unlabeled(toy_pair(2, 8).target);
  Model src = pretrain_source(toy_pair(2, 8).source, toy_spec(2), toy_config(2, 8, 0.1));
  auto cfg = toy_config(1, target.size(), 0.02);
  cfg.weights = {0.0, 0.5};
  RunOptions o;
  o.state_path = dir / "state.arc";
  adapt(src, target, cfg, o);
  const Tensor stored = archive::Archive::load(dir / "state.arc").tensor("bank/globals");

  Model replay = src;
  const auto trace = replay.forward(data::normalize(target.images), ops::BnMode::kTrain);
  ASSERT_EQ(stored.shape(), trace.z.shape());
  EXPECT_LT(max_abs_diff(stored, trace.z), 1e-9);
}

TEST(Adapt, MismatchedClassCountRejected) {
  auto target = toy_pair(2, 4).target;
  EXPECT_THROW(adapt(source_model(), target, toy_config(1, 4, 0.01)), ConfigError);
}

TEST(Score, CountingOracle) {
  oracle::Rng rng(5);
  const std::size_t k = 4, n = 200;
  std::vector<std::size_t> pred(n), truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    pred[i] = oracle::uniform_index(rng, 0, k - 1);
    truth[i] = oracle::uniform_index(rng, 0, k - 2);
  }
  const auto m = score(pred, truth, k);
  std::size_t hits = 0;
  std::vector<std::size_t> per_hit(k, 0), per_n(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    hits += pred[i] == truth[i];
    per_hit[truth[i]] += pred[i] == truth[i];
    ++per_n[truth[i]];
    EXPECT_GE(m.confusion[truth[i]][pred[i]], 1u);
  }
  EXPECT_EQ(m.count, n);
  EXPECT_DOUBLE_EQ(m.accuracy, static_cast<double>(hits) / n);
  double mean = 0;
  for (std::size_t c = 0; c + 1 < k; ++c) {
    const double acc = static_cast<double>(per_hit[c]) / per_n[c];
    EXPECT_DOUBLE_EQ(m.per_class_accuracy[c], acc);
    mean += acc / (k - 1);
  }
  EXPECT_TRUE(std::isnan(m.per_class_accuracy[k - 1]));
  EXPECT_NEAR(m.mean_class_accuracy, mean, 1e-12);
  std::size_t total = 0;
  for (const auto& row : m.confusion)
    for (auto v : row) total += v;
  EXPECT_EQ(total, n);
}

TEST(Score, PerfectAndConstantPredictors) {
  const std::vector<std::size_t> y{0, 1, 2, 0, 1, 2};
  const auto perfect = score(y, y, 3);
  EXPECT_EQ(perfect.accuracy, 1.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(perfect.confusion[i][j], i == j ? 2u : 0u);
  const std::vector<std::size_t> zeros(6, 0);
  EXPECT_NEAR(score(zeros, y, 3).accuracy, 1.0 / 3, 1e-15);
}

TEST(Evaluate, RequiresLabels) {
  Model m = source_model();
  EXPECT_THROW(evaluate(m, unlabeled(toy_pair(3, 2).target)), ConfigError);
}

TEST(Checkpoint, RoundTripPreservesOutputsAndSpec) {
  TempDir dir;
  Model m = source_model();
  save_checkpoint(m, dir / "m.ckpt");
  Model back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.spec(), m.spec());
  const auto x = toy_pair(3, 2).target.images;
  EXPECT_EQ(infer(back, x).logits.storage(), infer(m, x).logits.storage());
  EXPECT_EQ(head_bytes(back), head_bytes(m));
  const auto ar = archive::Archive::load(dir / "m.ckpt");
  EXPECT_TRUE(ar.has("head/weight"));
  EXPECT_TRUE(ar.has("head/bias"));
}

TEST(Infer, ChunkingDoesNotChangeResults) {
  Model m = source_model();
  const auto x = toy_pair(3, 4).target.images;
  EXPECT_EQ(infer(m, x, 5).z.storage(), infer(m, x, 256).z.storage());
}

}  // namespace
