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

// Prints one PASS/FAIL line per acceptance criterion; exits non-zero when any
// selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <CLI11.hpp>

#include "arfnet/aem.hpp"
#include "arfnet/backbone.hpp"
#include "arfnet/centroids.hpp"
#include "arfnet/config.hpp"
#include "arfnet/errors.hpp"
#include "arfnet/contrast.hpp"
#include "arfnet/losses.hpp"
#include "arfnet/pipeline.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

namespace {

using namespace arfnet;
using oracle::randn;
using oracle::Rng;
using oracle::uniform_index;
using oracle::unit_rows;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v, int digits = 3) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

std::vector<std::size_t> all_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  return ids;
}

// ---- 1 --------------------------------------------------------------------

Outcome gac_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  Outcome o;
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = uniform_index(rng, 2, 32), b = uniform_index(rng, 1, std::min<std::size_t>(8, n));
    const std::size_t d = uniform_index(rng, 1, 16);
    const double tau = trial % 2 == 0 ? 0.07 : 1.0;
    contrast::MemoryBank bank(n, d);
    bank.update(all_ids(n), unit_rows(randn({n, d}, rng)), unit_rows(randn({n, d}, rng)));
    auto perm = all_ids(n);
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::vector<std::size_t> ids(perm.begin(), perm.begin() + static_cast<long>(b));
    const Tensor g = unit_rows(randn({b, d}, rng)), l = unit_rows(randn({b, d}, rng));
    const double got = contrast::gac_loss(g, l, ids, bank, tau).value;
    const double want = oracle::gac(g, l, ids, bank.globals(), tau);
    worst = std::max(worst, std::abs(got - want));
  }
  const double t = seconds_since(t0);
  o.require(worst <= 1e-6, "max abs error " + num(worst));
  o.require(t < 10.0, "runtime " + num(t) + " s");
  if (o.pass) o.detail = "200 instances, max abs error " + num(worst) + ", " + num(t) + " s";
  return o;
}

// ---- 2 --------------------------------------------------------------------

Outcome centroid_oracles() {
  Rng rng(202);
  Outcome o;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = uniform_index(rng, 1, 64), k = uniform_index(rng, 1, 5), d = uniform_index(rng, 1, 16);
    const Tensor z = unit_rows(randn({n, d}, rng)), logits = randn({n, k}, rng, 3.0);

    const auto got = centroids::compute_centroids(z, logits);
    const auto want = oracle::weighted_centroids(z, logits);
    worst = std::max(worst, max_abs_diff(got.values, want.values));
    o.require(got.empty == want.empty, "compute_centroids empty flags differ");

    const Tensor c = randn({k, d}, rng);
    std::vector<std::uint8_t> empty(k, 0);
    if (k > 1 && trial % 3 == 0) empty[uniform_index(rng, 0, k - 1)] = 1;
    o.require(centroids::assign_labels(z, c, empty).labels == oracle::nearest(z, c, empty),
              "assign_labels differs from brute force");

    std::vector<std::size_t> y(n);
    for (auto& v : y) v = uniform_index(rng, 0, k - 1);
    const centroids::PseudoLabels pl{y, {}};
    o.require(centroids::refine_labels(z, pl, k).labels.labels == oracle::refine(z, y, k, nullptr),
              "refine_labels differs from one-round oracle");
    o.require(centroids::refine_labels(z, pl, k, &c).labels.labels == oracle::refine(z, y, k, &c),
              "refine_labels with prior differs from oracle");
  }
  o.require(worst <= 1e-6, "centroid max abs error " + num(worst));
  if (o.pass) o.detail = "100 instances, labels exact, centroid max abs error " + num(worst);
  return o;
}

// ---- 3 --------------------------------------------------------------------

Outcome gradient_suite() {
  Rng rng(303);
  Outcome o;
  double worst = 0;
  auto take = [&](const std::string& name, const gradcheck::Result& r) {
    worst = std::max(worst, r.max_rel);
    o.require(r.checked >= 20, name + " checked only " + std::to_string(r.checked) + " points");
    o.require(r.max_rel < 1e-4, name + " relative error " + num(r.max_rel) + " at " + r.worst);
  };

  {
    aem::AemParams params(8, 2, rng);
    Param f(randn({2, 8, 8, 8}, rng));
    std::vector<gradcheck::Target> targets{{"f", &f}};
    params.visit("aem", [&](const std::string& n, Param& p) { targets.emplace_back(n, &p); });
    take("aem attended", gradcheck::check(
                             [&](Graph& g) { return aem::aem_forward(g, g.param(f), params, ops::BnMode::kTrain).attended; },
                             targets, rng));
    take("aem gate", gradcheck::check(
                         [&](Graph& g) { return aem::aem_forward(g, g.param(f), params, ops::BnMode::kTrain).gate; },
                         targets, rng));
  }
  {
    Param a(randn({2, 3, 4, 4}, rng)), b(randn({2, 3, 4, 4}, rng));
    take("fuse", gradcheck::check([&](Graph& g) { return backbone::fuse(g, g.param(a), g.param(b)); },
                                  {{"a", &a}, {"b", &b}}, rng));
  }
  for (double tau : {0.07, 1.0}) {
    contrast::MemoryBank bank(10, 6);
    bank.update(all_ids(10), unit_rows(randn({10, 6}, rng)), unit_rows(randn({10, 6}, rng)));
    const std::vector<std::size_t> ids{3, 7, 1, 0};
    const Tensor gl = unit_rows(randn({4, 6}, rng)), lo = unit_rows(randn({4, 6}, rng));
    const auto r = contrast::gac_loss(gl, lo, ids, bank, tau);
    take("gac global", gradcheck::check_fn(
                           [&](const Tensor& t) { return contrast::gac_loss(t, lo, ids, bank, tau).value; }, gl,
                           r.grad_global, rng));
    take("gac local", gradcheck::check_fn(
                          [&](const Tensor& t) { return contrast::gac_loss(gl, t, ids, bank, tau).value; }, lo,
                          r.grad_local, rng));
  }
  {
    const Tensor logits = randn({8, 3}, rng, 2.0);
    const std::vector<Tensor> layers{randn({8, 3}, rng), randn({8, 3}, rng)};
    const std::vector<std::size_t> y{0, 2, 1, 1, 0, 2, 2, 1};
    const auto r = losses::ssd_loss(logits, layers, y);
    take("ssd ce", gradcheck::check_fn([&](const Tensor& t) { return losses::ssd_loss(t, layers, y).ce; }, logits,
                                       r.grad_logits, rng));
    take("ssd kd teacher", gradcheck::check_fn([&](const Tensor& t) { return losses::ssd_loss(t, layers, y).kd; },
                                               logits, r.grad_logits_teacher, rng));
    for (std::size_t l = 0; l < layers.size(); ++l) {
      take("ssd kd layer " + std::to_string(l), gradcheck::check_fn(
                                                    [&](const Tensor& t) {
                                                      auto copy = layers;
                                                      copy[l] = t;
                                                      return losses::ssd_loss(logits, copy, y).kd;
                                                    },
                                                    layers[l], r.grad_layer_logits[l], rng));
    }
  }
  {
    const Tensor logits = randn({6, 4}, rng, 2.0);
    take("im", gradcheck::check_fn([](const Tensor& t) { return losses::im_loss(t).value; }, logits,
                                   losses::im_loss(logits).grad, rng));
  }
  {
    backbone::BlockSpec s;
    s.channels = {8, 16};
    s.strides = {1, 2};
    s.input_size = 16;
    s.latent_dim = 12;
    s.num_classes = 3;
    backbone::Model model(s, 11);
    Param x(randn({2, 3, 16, 16}, rng));
    std::vector<gradcheck::Target> targets{{"x", &x}};
    model.visit_params([&](const std::string& n, Param& p) { targets.emplace_back(n, &p); });
    take("backbone logits", gradcheck::check(
                                [&](Graph& g) { return model.forward(g, g.param(x), ops::BnMode::kTrain).logits; },
                                targets, rng, 4));
    take("backbone z", gradcheck::check(
                           [&](Graph& g) { return model.forward(g, g.param(x), ops::BnMode::kTrain).z; }, targets,
                           rng, 4));
    take("backbone layer logits", gradcheck::check(
                                      [&](Graph& g) {
                                        return model.forward(g, g.param(x), ops::BnMode::kTrain).layer_logits[0];
                                      },
                                      targets, rng, 4));
  }
  if (o.pass) o.detail = "worst relative error " + num(worst);
  return o;
}

// ---- 4 --------------------------------------------------------------------

Outcome closed_forms() {
  Rng rng(404);
  Outcome o;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t b = uniform_index(rng, 1, 16), k = uniform_index(rng, 2, 8);
    const double scale = std::pow(10.0, oracle::uniform({1}, rng, -2, 2)[0]);
    const double v = losses::im_loss(randn({b, k}, rng, scale)).value;
    const double lk = std::log(static_cast<double>(k));
    o.require(v >= -lk - 1e-12 && v <= lk + 1e-12, "im_loss " + num(v) + " outside [-log K, log K]");
  }
  for (std::size_t k : {2, 3, 5, 10}) {
    Tensor logits({2 * k, k}, -1e4);
    for (std::size_t i = 0; i < 2 * k; ++i) logits.at(i, i % k) = 1e4;
    const double v = losses::im_loss(logits).value;
    o.require(std::abs(v + std::log(static_cast<double>(k))) <= 1e-9, "balanced one-hot im_loss " + num(v, 12));
  }
  {
    const Tensor logits = randn({5, 4}, rng);
    const std::vector<Tensor> layers{logits, logits, logits};
    const double kd = losses::ssd_loss(logits, layers, std::vector<std::size_t>{0, 1, 2, 3, 0}).kd;
    o.require(kd == 0.0, "kd " + num(kd, 12) + " for identical logits");
  }
  for (std::size_t n : {2, 5, 17, 32}) {
    for (double tau : {0.07, 1.0}) {
      const std::size_t d = 4;
      Tensor same({n, d});
      for (std::size_t i = 0; i < n; ++i) same.at(i, 0) = 1.0;
      contrast::MemoryBank bank(n, d);
      bank.update(all_ids(n), same, same);
      const std::vector<std::size_t> ids{0};
      const Tensor one({1, d}, {1, 0, 0, 0});
      const double v = contrast::gac_loss(one, one, ids, bank, tau).value;
      o.require(std::abs(v - std::log(static_cast<double>(n - 1))) <= 1e-9,
                "equal-similarity gac " + num(v, 12) + " for N=" + std::to_string(n));
    }
  }
  if (o.pass) o.detail = "1000 im batches in range, -log K, kd=0 and log(N-1) hold";
  return o;
}

// ---- 5 --------------------------------------------------------------------

Outcome ems_algebra() {
  Rng rng(505);
  Outcome o;
  const std::size_t k = 3, d = 4;
  auto fresh = [&](const Tensor& v) { return centroids::Centroids{v, std::vector<std::uint8_t>(k, 0)}; };
  auto seeded = [&](const Tensor& c0, double lambda) {
    return centroids::ems_update(centroids::CentroidTable{Tensor(), {}, std::nullopt, lambda}, fresh(c0));
  };
  const Tensor c0 = randn({k, d}, rng), v = randn({k, d}, rng);
  o.require(centroids::ems_update(seeded(c0, 0.0), fresh(v)).centroids.storage() == v.storage(),
            "lambda=0 does not return the fresh centroids");
  o.require(centroids::ems_update(seeded(c0, 1.0), fresh(v)).centroids.storage() == c0.storage(),
            "lambda=1 does not keep the previous centroids");
  auto t = seeded(c0, 0.1);
  double d0 = 0;
  for (std::size_t i = 0; i < c0.size(); ++i) d0 += (c0[i] - v[i]) * (c0[i] - v[i]);
  d0 = std::sqrt(d0);
  double worst = 0;
  for (int step = 1; step <= 10; ++step) {
    t = centroids::ems_update(t, fresh(v));
    double dist = 0;
    for (std::size_t i = 0; i < v.size(); ++i) dist += (t.centroids[i] - v[i]) * (t.centroids[i] - v[i]);
    worst = std::max(worst, std::abs(std::sqrt(dist) - std::pow(0.1, step) * d0));
  }
  o.require(worst <= 1e-9, "telescoping error " + num(worst));
  if (o.pass) o.detail = "degenerate lambdas exact, telescoping error " + num(worst);
  return o;
}

// ---- shared small adaptation setup for 6 and 8 -------------------------------

config::Config small_config() {
  config::Config c;
  c.merge_text(
      "data.num_classes = 3\n"
      "data.samples_per_class = 12\n"
      "data.image_size = 16\n"
      "model.channels = 8,16\n"
      "model.strides = 1,2\n"
      "model.latent_dim = 16\n"
      "pretrain.epochs = 4\n"
      "pretrain.batch_size = 8\n"
      "pretrain.lr = 0.05\n"
      "adapt.epochs = 3\n"
      "adapt.batch_size = 8\n",
      "acceptance");
  return c;
}

struct SmallRun {
  backbone::Model source;
  data::Dataset target;
};

SmallRun small_run() {
  const auto c = small_config();
  auto pair = data::gen_domain_pair(c.domain_spec());
  auto model = pipeline::pretrain_source(pair.source, c.block_spec(), c.pretrain_config());
  pair.target.labels.reset();
  return {std::move(model), std::move(pair.target)};
}

// ---- 6 --------------------------------------------------------------------

Outcome freeze_contract() {
  Outcome o;
  auto run = small_run();
  const auto before = pipeline::head_bytes(run.source);
  auto adapted = pipeline::adapt(run.source, run.target, small_config().adapt_config());
  o.require(pipeline::head_bytes(adapted) == before, "head bytes changed during adaptation");
  bool caught = false;
  pipeline::RunOptions tamper;
  tamper.on_epoch = [](const pipeline::EpochSummary&, backbone::Model& m) {
    m.visit_params([](const std::string& n, Param& p) {
      if (n == "head/bias") p.value[0] += 1e-12;
    });
  };
  try {
    pipeline::adapt(run.source, run.target, small_config().adapt_config(), tamper);
  } catch (const ContractViolation&) {
    caught = true;
  }
  o.require(caught, "injected head drift was not reported");
  if (o.pass) o.detail = std::to_string(before.size()) + " head bytes identical; injected drift rejected";
  return o;
}

// ---- 7 --------------------------------------------------------------------

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

Outcome ablation_trend(bool verbose) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  const char* names[] = {"source-only", "IM", "IM+SSD", "IM+GAC", "full"};
  std::vector<std::vector<double>> acc(5);
  for (std::uint64_t seed : {0, 1, 2}) {
    config::Config c;
    c.set("seed", std::to_string(seed));
    const auto pair = data::gen_domain_pair(c.domain_spec());
    auto model = pipeline::pretrain_source(pair.source, c.block_spec(), c.pretrain_config());
    acc[0].push_back(pipeline::evaluate(model, pair.target).accuracy);
    data::Dataset target = pair.target;
    target.labels.reset();
    const auto base = c.adapt_config();
    const std::pair<double, double> weights[] = {
        {0.0, 0.0}, {base.weights.alpha, 0.0}, {0.0, base.weights.beta}, {base.weights.alpha, base.weights.beta}};
    for (std::size_t r = 0; r < 4; ++r) {
      auto cfg = base;
      cfg.weights.alpha = weights[r].first;
      cfg.weights.beta = weights[r].second;
      auto adapted = pipeline::adapt(model, target, cfg);
      acc[r + 1].push_back(pipeline::evaluate(adapted, pair.target).accuracy);
    }
    if (verbose) {
      std::cerr << "  seed " << seed;
      for (std::size_t r = 0; r < 5; ++r) std::cerr << ' ' << names[r] << ' ' << acc[r].back();
      std::cerr << " (" << num(seconds_since(t0), 4) << " s)\n";
    }
  }
  std::vector<double> m(5);
  for (std::size_t r = 0; r < 5; ++r) m[r] = median3(acc[r]);
  const double t = seconds_since(t0);
  std::string medians = "medians";
  for (std::size_t r = 0; r < 5; ++r) medians += std::string(" ") + names[r] + "=" + num(m[r]);
  medians += ", " + num(t, 4) + " s";
  o.require(m[0] < m[1], "source-only >= IM");
  o.require(m[1] <= m[2], "IM > IM+SSD");
  o.require(m[1] <= m[3], "IM > IM+GAC");
  o.require(m[4] >= *std::max_element(m.begin(), m.end()), "full is not the maximum");
  o.require(m[4] - m[0] >= 0.10, "full gains under 10 points over source-only");
  o.require(t < 1800.0, "runtime over 30 minutes");
  o.detail = (o.pass ? "" : o.detail + "; ") + medians;
  return o;
}

// ---- 8 --------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / ("arfnet_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto run = small_run();
  std::string csv[2];
  for (int i = 0; i < 2; ++i) {
    pipeline::RunOptions opts;
    opts.metrics_csv = dir / ("metrics" + std::to_string(i) + ".csv");
    pipeline::adapt(run.source, run.target, small_config().adapt_config(), opts);
    csv[i] = slurp(opts.metrics_csv);
  }
  fs::remove_all(dir);
  o.require(!csv[0].empty(), "metrics CSV empty");
  o.require(csv[0] == csv[1], "metrics CSVs differ");
  if (o.pass) o.detail = std::to_string(csv[0].size()) + " bytes identical";
  return o;
}

// ---- 9 --------------------------------------------------------------------

Outcome fuzz_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(909);
  Outcome o;
  const std::size_t widths[] = {4, 8, 16};
  const std::size_t extents[] = {4, 6, 8, 10, 12};
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t c = widths[uniform_index(rng, 0, 2)];
    const std::size_t r = c == 4 ? uniform_index(rng, 1, 2) * 2 : std::size_t{1} << uniform_index(rng, 1, 2);
    const std::size_t b = uniform_index(rng, 1, 3);
    const std::size_t h = extents[uniform_index(rng, 0, 4)], w = extents[uniform_index(rng, 0, 4)];
    aem::AemParams params(c, r, rng);
    const Tensor f = randn({b, c, h, w}, rng, 3.0);
    const auto out = aem::aem_forward(f, params);
    o.require(out.attended.shape() == f.shape(), "AEM changed the feature-map shape");
    o.require(out.channel.shape() == (Shape{b, c}), "gate shape");
    for (double g : out.channel.data()) o.require(g > 0.0 && g < 1.0, "gate outside (0, 1)");
    const Tensor s = aem::spatial_attention(f, params);
    for (std::size_t plane = 0; plane < b * c; ++plane) {
      double sum = 0;
      for (std::size_t i = 0; i < h * w; ++i) sum += s[plane * h * w + i];
      o.require(std::abs(sum - 1.0) <= 1e-9, "spatial softmax sums to " + num(sum, 12));
    }
    if (trial % 5 == 0) {
      backbone::BlockSpec spec;
      spec.channels = {8, 16};
      spec.strides = {1, 2};
      spec.input_size = 16;
      spec.latent_dim = uniform_index(rng, 6, 24);
      spec.num_classes = uniform_index(rng, 2, 6);
      backbone::Model model(spec, static_cast<std::uint64_t>(trial));
      const Tensor z = model.forward(randn({2, 3, 16, 16}, rng, 2.0)).z;
      for (std::size_t i = 0; i < 2; ++i) {
        double n2 = 0;
        for (double v : z.row(i)) n2 += v * v;
        o.require(std::abs(std::sqrt(n2) - 1.0) <= 1e-9, "z row norm " + num(std::sqrt(n2), 12));
      }
    }
  }
  const double t = seconds_since(t0);
  o.require(t < 30.0, "runtime " + num(t) + " s");
  if (o.pass) o.detail = "500 cases, " + num(t) + " s";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria 1-9"};
  std::vector<int> only;
  bool verbose = false;
  app.add_option("--only", only, "run just these criteria")->delimiter(',');
  app.add_flag("-v,--verbose", verbose, "per-seed ablation progress on stderr");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"GAC oracle equivalence", gac_oracle},
      {"centroid oracle equivalence", centroid_oracles},
      {"gradient suite", gradient_suite},
      {"closed-form losses", closed_forms},
      {"EMS algebra", ems_algebra},
      {"freeze contract", freeze_contract},
      {"ablation trend", [verbose] { return ablation_trend(verbose); }},
      {"determinism", determinism},
      {"shape and normalization fuzz", fuzz_suite},
  };
  const std::set<int> selected(only.begin(), only.end());
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << "criterion " << id << ' ' << (o.pass ? "PASS" : "FAIL") << ": " << criteria[i].first << " ("
              << o.detail << ")" << std::endl;
  }
  return all ? 0 : 1;
}
