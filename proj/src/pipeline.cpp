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

#include "arfnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "arfnet/centroids.hpp"
#include "arfnet/contrast.hpp"
#include "arfnet/errors.hpp"
#include "arfnet/optim.hpp"

namespace arfnet::pipeline {
namespace {

namespace fs = std::filesystem;
using ops::BnMode;

constexpr std::uint64_t kShuffleSalt = 0x9E3779B97F4A7C15ull;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Per-step metrics log. On resume the file is cut back to the rows that the
// saved state accounts for, then appended to.
class MetricsLog {
 public:
  MetricsLog(const fs::path& path, std::optional<std::size_t> keep_rows) : path_(path) {
    if (path_.empty()) return;
    std::vector<std::string> kept;
    if (keep_rows) {
      std::ifstream in(path_);
      std::string line;
      std::getline(in, line);  // header
      while (kept.size() < *keep_rows && std::getline(in, line)) kept.push_back(line);
      if (kept.size() != *keep_rows) {
        throw IoError("pipeline: metrics CSV '" + path_.string() + "' has fewer rows than the saved state");
      }
    }
    out_.open(path_, std::ios::trunc);
    if (!out_) throw IoError("pipeline: cannot write metrics CSV '" + path_.string() + "'");
    out_ << "step,epoch,im,ce,kd,gac,total\n";
    for (const auto& l : kept) out_ << l << '\n';
    rows_ = kept.size();
  }

  void row(std::size_t step, std::size_t epoch, const losses::LossReport& r) {
    ++rows_;
    if (path_.empty()) return;
    out_ << step << ',' << epoch << ',' << fmt_double(r.im) << ',' << fmt_double(r.ce) << ','
         << fmt_double(r.kd) << ',' << fmt_double(r.gac) << ',' << fmt_double(r.total) << '\n';
  }

  void flush() {
    if (!path_.empty()) out_.flush();
  }
  std::size_t rows() const { return rows_; }

 private:
  fs::path path_;
  std::ofstream out_;
  std::size_t rows_ = 0;
};

void check_images(const Dataset& ds, const BlockSpec& spec, const char* what) {
  const Tensor& x = ds.images;
  if (x.rank() != 4 || x.dim(0) == 0 || x.dim(1) != spec.input_channels ||
      x.dim(2) != spec.input_size || x.dim(3) != spec.input_size) {
    throw ConfigError(std::string("pipeline: ") + what + " images have shape " + shape_str(x.shape()) +
                      ", model expects (N, " + std::to_string(spec.input_channels) + ", " +
                      std::to_string(spec.input_size) + ", " + std::to_string(spec.input_size) + ")");
  }
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

double unit_draw(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Replaces each sample, with probability 1/2, by a center crop of random side
/// fraction in [min_crop, 1].
void random_center_crops(Tensor& batch, double min_crop, Rng& rng) {
  const std::size_t stride = batch.size() / batch.dim(0);
  const Shape image_shape{batch.dim(1), batch.dim(2), batch.dim(3)};
  for (std::size_t i = 0; i < batch.dim(0); ++i) {
    if (unit_draw(rng) < 0.5) continue;
    const double frac = min_crop + (1.0 - min_crop) * unit_draw(rng);
    Tensor image(image_shape);
    std::copy_n(batch.ptr() + i * stride, stride, image.ptr());
    const Tensor local = contrast::make_views(image, frac).local;
    std::copy_n(local.ptr(), stride, batch.ptr() + i * stride);
  }
}

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void set_rng_state(Rng& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng;
  if (!is) throw IoError("pipeline: corrupt RNG state in training-state archive");
}

optim::Sgd make_sgd(const TrainConfig& c) {
  return optim::Sgd(optim::SgdConfig{c.lr, c.momentum, c.weight_decay});
}

optim::ParamWalker walker(Model& m) {
  return [&m](const ParamVisitor& fn) { m.visit_params(fn); };
}

// Bookkeeping shared by both phases' training-state archives.
struct Progress {
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::size_t metrics_rows = 0;
};

archive::Archive make_state(const char* phase, Model& model, const optim::Sgd& sgd, const Rng& rng,
                            const TrainConfig& config, const Progress& p) {
  archive::Archive ar = to_checkpoint(model);
  sgd.save(ar);
  ar.metadata["state.phase"] = phase;
  ar.metadata["state.epoch"] = std::to_string(p.epoch);
  ar.metadata["state.step"] = std::to_string(p.step);
  ar.metadata["state.metrics_rows"] = std::to_string(p.metrics_rows);
  ar.metadata["state.rng"] = rng_state(rng);
  for (const auto& [k, v] : config.to_metadata()) ar.metadata["config." + k] = v;
  return ar;
}

Progress read_state(const archive::Archive& ar, const char* phase, const TrainConfig& config,
                    optim::Sgd& sgd, Rng& rng) {
  if (ar.meta("state.phase") != phase) {
    throw ConfigError(std::string("pipeline: resume archive belongs to phase '") + ar.meta("state.phase") +
                      "', not '" + phase + "'");
  }
  for (const auto& [k, v] : config.to_metadata()) {
    if (k == "epochs") continue;
    const std::string& saved = ar.meta("config." + k);
    if (saved != v) {
      throw ConfigError("pipeline: resume config mismatch on '" + k + "' (saved " + saved + ", now " + v + ")");
    }
  }
  sgd.load(ar);
  set_rng_state(rng, ar.meta("state.rng"));
  Progress p;
  p.epoch = std::stoul(ar.meta("state.epoch"));
  p.step = std::stoul(ar.meta("state.step"));
  p.metrics_rows = std::stoul(ar.meta("state.metrics_rows"));
  return p;
}

void accumulate(losses::LossReport& acc, const losses::LossReport& r) {
  acc.im += r.im;
  acc.ce += r.ce;
  acc.kd += r.kd;
  acc.gac += r.gac;
  acc.total += r.total;
}

EpochSummary summarize(std::size_t epoch, std::size_t steps, losses::LossReport acc) {
  const double s = steps ? 1.0 / static_cast<double>(steps) : 0.0;
  acc.im *= s;
  acc.ce *= s;
  acc.kd *= s;
  acc.gac *= s;
  acc.total *= s;
  return {epoch, steps, acc};
}

void save_tensor_rows(archive::Archive& ar, const std::string& name, const std::vector<std::size_t>& v) {
  ar.put_i64(name, std::vector<std::int64_t>(v.begin(), v.end()));
}

}  // namespace

void TrainConfig::validate() const {
  ARFNET_CHECK_CONFIG(batch_size > 0, "pipeline: batch_size must be > 0");
  ARFNET_CHECK_CONFIG(lr > 0.0 && std::isfinite(lr), "pipeline: lr must be > 0");
  ARFNET_CHECK_CONFIG(momentum >= 0.0 && momentum < 1.0, "pipeline: momentum must lie in [0, 1)");
  ARFNET_CHECK_CONFIG(weight_decay >= 0.0, "pipeline: weight_decay must be >= 0");
  ARFNET_CHECK_CONFIG(tau > 0.0, "pipeline: tau must be > 0");
  ARFNET_CHECK_CONFIG(lambda >= 0.0 && lambda <= 1.0, "pipeline: lambda must lie in [0, 1]");
  ARFNET_CHECK_CONFIG(crop_fraction > 0.0 && crop_fraction <= 1.0,
                      "pipeline: crop_fraction must lie in (0, 1]");
  ARFNET_CHECK_CONFIG(min_crop > 0.0 && min_crop <= 1.0, "pipeline: min_crop must lie in (0, 1]");
  weights.validate();
}

std::map<std::string, std::string> TrainConfig::to_metadata() const {
  return {
      {"epochs", std::to_string(epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"lr", fmt_double(lr)},
      {"momentum", fmt_double(momentum)},
      {"weight_decay", fmt_double(weight_decay)},
      {"alpha", fmt_double(weights.alpha)},
      {"beta", fmt_double(weights.beta)},
      {"tau", fmt_double(tau)},
      {"lambda", fmt_double(lambda)},
      {"crop_fraction", fmt_double(crop_fraction)},
      {"seed", std::to_string(seed)},
      {"kd_include_final", kd_include_final ? "1" : "0"},
      {"fit_layer_heads", fit_layer_heads ? "1" : "0"},
      {"min_crop", fmt_double(min_crop)},
  };
}

Model pretrain_source(const Dataset& source, const BlockSpec& spec, const TrainConfig& config,
                      const RunOptions& options) {
  config.validate();
  spec.validate();
  if (!source.labeled()) throw ConfigError("pipeline: pretrain_source needs a labeled dataset");
  if (source.num_classes() != spec.num_classes) {
    throw ConfigError("pipeline: dataset has " + std::to_string(source.num_classes()) +
                      " classes but model.num_classes is " + std::to_string(spec.num_classes));
  }
  check_images(source, spec, "source");
  const auto& labels = *source.labels;
  for (auto y : labels) {
    if (y >= spec.num_classes) throw ConfigError("pipeline: source label out of range");
  }

  Model model(spec, config.seed);
  optim::Sgd sgd = make_sgd(config);
  Rng rng(config.seed + kShuffleSalt);
  Progress prog;
  std::optional<std::size_t> keep_rows;
  if (options.resume_from) {
    const auto ar = archive::Archive::load(*options.resume_from);
    model = from_checkpoint(ar);
    if (!(model.spec() == spec)) throw ConfigError("pipeline: resume archive was written for a different model spec");
    prog = read_state(ar, "pretrain", config, sgd, rng);
    keep_rows = prog.metrics_rows;
  }
  MetricsLog log(options.metrics_csv, keep_rows);
  const Tensor x = data::normalize(source.images);
  const std::size_t n = source.size();

  for (std::size_t epoch = prog.epoch; epoch < config.epochs; ++epoch) {
    if (options.stop_after_epochs && epoch >= *options.stop_after_epochs) break;
    const auto order = shuffled(n, rng);
    losses::LossReport acc;
    std::size_t steps = 0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      std::span<const std::size_t> idx(order.data() + begin, end - begin);
      std::vector<std::size_t> y;
      for (auto i : idx) y.push_back(labels[i]);
      Tensor batch = gather_batch(x, idx);
      if (config.min_crop < 1.0) random_center_crops(batch, config.min_crop, rng);
      Graph g;
      const auto fv = model.forward(g, g.constant(std::move(batch)), BnMode::kTrain);
      const auto ce = losses::source_ce(g.value(fv.logits), y);
      const auto report = losses::make_report(0.0, ce.value, 0.0, 0.0, losses::LossWeights{1.0, 0.0});
      std::vector<std::pair<Var, Tensor>> seeds{{fv.logits, ce.grad}};
      if (config.fit_layer_heads) {
        for (std::size_t l = 0; l < fv.gates.size(); ++l) {
          const Var aux = model.layer_head(l)(g, g.constant(g.value(fv.gates[l])));
          seeds.emplace_back(aux, losses::source_ce(g.value(aux), y).grad);
        }
      }
      model.zero_grad();
      g.backward(seeds);
      sgd.step(walker(model));
      ++prog.step;
      log.row(prog.step, epoch + 1, report);
      accumulate(acc, report);
      ++steps;
    }
    prog.epoch = epoch + 1;
    log.flush();
    prog.metrics_rows = log.rows();
    if (!options.state_path.empty()) {
      make_state("pretrain", model, sgd, rng, config, prog).save(options.state_path);
    }
    if (options.on_epoch) options.on_epoch(summarize(prog.epoch, steps, acc), model);
  }
  return model;
}

Model adapt(Model model, const Dataset& target, const TrainConfig& config, const RunOptions& options) {
  config.validate();
  const BlockSpec spec = model.spec();
  check_images(target, spec, "target");
  if (!target.class_names.empty() && target.num_classes() != spec.num_classes) {
    throw ConfigError("pipeline: target lists " + std::to_string(target.num_classes()) +
                      " classes but the checkpoint head has " + std::to_string(spec.num_classes));
  }
  const std::size_t n = target.size();
  const std::size_t num_classes = spec.num_classes;
  const bool use_ssd = config.weights.alpha > 0.0;
  const bool use_gac = config.weights.beta > 0.0;
  if (use_gac && n < 2) throw ConfigError("pipeline: contrast needs at least 2 target samples");

  model.head().freeze();
  std::vector<std::uint8_t> reference = head_bytes(model);

  optim::Sgd sgd = make_sgd(config);
  Rng rng(config.seed + kShuffleSalt);
  contrast::MemoryBank bank(n, spec.latent_dim);
  centroids::CentroidTable table;
  table.lambda = config.lambda;
  Progress prog;
  std::optional<std::size_t> keep_rows;

  const Tensor xg = data::normalize(target.images);
  Tensor xl;
  if (use_gac) xl = data::normalize(contrast::make_local_views(target.images, config.crop_fraction));

  if (options.resume_from) {
    const auto ar = archive::Archive::load(*options.resume_from);
    model = from_checkpoint(ar);
    model.head().freeze();
    reference = ar.u8("reference/head");
    prog = read_state(ar, "adapt", config, sgd, rng);
    keep_rows = prog.metrics_rows;
    if (ar.has("bank/globals")) {
      bank = contrast::MemoryBank::restore(ar.tensor("bank/globals"), ar.tensor("bank/locals"),
                                           ar.u8("bank/initialized"));
    }
    if (ar.has("centroids/values")) {
      table.centroids = ar.tensor("centroids/values");
      table.empty = ar.u8("centroids/empty");
      if (ar.has("centroids/previous")) table.previous = ar.tensor("centroids/previous");
    }
  } else if (use_gac) {
    // Bootstrap: every slot holds an eval-mode embedding pair before the
    // first contrast term is computed.
    const auto tg = infer(model, target.images);
    Tensor local_raw = contrast::make_local_views(target.images, config.crop_fraction);
    const auto tl = infer(model, local_raw);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    bank.update(all, tg.z, tl.z);
  }
  if (use_gac && !bank.all_initialized()) {
    throw ContractViolation("pipeline: memory bank has uninitialized slots after bootstrap");
  }

  MetricsLog log(options.metrics_csv, keep_rows);
  std::ofstream centroid_log;
  if (!options.centroid_csv.empty()) {
    const bool append = options.resume_from.has_value() && fs::exists(options.centroid_csv);
    centroid_log.open(options.centroid_csv, append ? std::ios::app : std::ios::trunc);
    if (!append) centroid_log << "epoch,class,assigned,refined,empty,kept_prior\n";
  }

  const std::size_t kd_layers = config.kd_include_final ? spec.num_blocks() : spec.num_blocks() - 1;

  for (std::size_t epoch = prog.epoch; epoch < config.epochs; ++epoch) {
    if (options.stop_after_epochs && epoch >= *options.stop_after_epochs) break;

    std::vector<std::size_t> pseudo;
    if (use_ssd) {
      const auto trace = infer(model, target.images);
      const auto fresh = centroids::compute_centroids(trace.z, trace.logits);
      table = centroids::ems_update(table, fresh);
      const auto assigned = centroids::assign_labels(trace.z, table);
      const auto refined = centroids::refine_labels(trace.z, assigned, num_classes, &table.centroids);
      pseudo = refined.labels.labels;
      if (centroid_log.is_open()) {
        std::vector<std::size_t> a(num_classes, 0), r(num_classes, 0);
        for (auto l : assigned.labels) ++a[l];
        for (auto l : pseudo) ++r[l];
        for (std::size_t k = 0; k < num_classes; ++k) {
          centroid_log << epoch + 1 << ',' << k << ',' << a[k] << ',' << r[k] << ','
                       << int(table.empty[k]) << ',' << int(refined.kept_prior[k]) << '\n';
        }
      }
    }

    const auto order = shuffled(n, rng);
    losses::LossReport acc;
    std::size_t steps = 0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      std::span<const std::size_t> idx(order.data() + begin, end - begin);

      Graph g;
      const auto fg = model.forward(g, g.constant(gather_batch(xg, idx)), BnMode::kTrain);
      const Tensor& logits = g.value(fg.logits);
      const auto im = losses::im_loss(logits);
      Tensor grad_logits = im.grad;
      std::vector<std::pair<Var, Tensor>> seeds;
      double ce = 0.0, kd = 0.0, gac = 0.0;

      if (use_ssd) {
        std::vector<Tensor> layers;
        for (std::size_t l = 0; l < kd_layers; ++l) layers.push_back(g.value(fg.layer_logits[l]));
        std::vector<std::size_t> y;
        for (auto i : idx) y.push_back(pseudo[i]);
        // The output distribution is the distillation teacher: its kd
        // gradient is dropped.
        const auto s = losses::ssd_loss(logits, layers, y);
        ce = s.ce;
        kd = s.kd;
        grad_logits += s.grad_logits * config.weights.alpha;
        for (std::size_t l = 0; l < kd_layers; ++l) {
          seeds.emplace_back(fg.layer_logits[l], s.grad_layer_logits[l] * config.weights.alpha);
        }
      }

      Var local_z;
      if (use_gac) {
        const auto fl = model.forward(g, g.constant(gather_batch(xl, idx)), BnMode::kTrainFrozen);
        local_z = fl.z;
        const auto r = contrast::gac_loss(g.value(fg.z), g.value(fl.z), idx, bank, config.tau);
        gac = r.value;
        seeds.emplace_back(fg.z, r.grad_global * config.weights.beta);
        seeds.emplace_back(fl.z, r.grad_local * config.weights.beta);
      }
      seeds.emplace_back(fg.logits, std::move(grad_logits));

      const auto report = losses::make_report(im.value, ce, kd, gac, config.weights);
      model.zero_grad();
      g.backward(seeds);
      sgd.step(walker(model));
      if (use_gac) bank.update(idx, g.value(fg.z), g.value(local_z));

      ++prog.step;
      log.row(prog.step, epoch + 1, report);
      accumulate(acc, report);
      ++steps;
    }
    prog.epoch = epoch + 1;
    log.flush();
    if (centroid_log.is_open()) centroid_log.flush();
    prog.metrics_rows = log.rows();
    if (!options.state_path.empty()) {
      auto ar = make_state("adapt", model, sgd, rng, config, prog);
      ar.put_u8("reference/head", reference);
      if (use_gac) {
        ar.put("bank/globals", bank.globals());
        ar.put("bank/locals", bank.locals());
        ar.put_u8("bank/initialized", bank.initialized_flags());
      }
      if (table.centroids.size() > 0) {
        ar.put("centroids/values", table.centroids);
        ar.put_u8("centroids/empty", table.empty);
        if (table.previous) ar.put("centroids/previous", *table.previous);
      }
      if (!pseudo.empty()) save_tensor_rows(ar, "pseudo_labels", pseudo);
      ar.save(options.state_path);
    }
    if (options.on_epoch) options.on_epoch(summarize(prog.epoch, steps, acc), model);
  }

  if (head_bytes(model) != reference) {
    throw ContractViolation("pipeline: classifier head changed during adaptation");
  }
  return model;
}

Metrics score(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
              std::size_t num_classes) {
  if (predictions.size() != labels.size()) {
    throw ConfigError("pipeline: prediction and label counts differ");
  }
  Metrics m;
  m.count = labels.size();
  m.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes || predictions[i] >= num_classes) {
      throw ConfigError("pipeline: class id out of range in score()");
    }
    ++m.confusion[labels[i]][predictions[i]];
    correct += labels[i] == predictions[i];
  }
  m.accuracy = m.count ? static_cast<double>(correct) / static_cast<double>(m.count) : 0.0;
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    std::size_t row = 0;
    for (auto c : m.confusion[k]) row += c;
    if (row == 0) {
      m.per_class_accuracy.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double a = static_cast<double>(m.confusion[k][k]) / static_cast<double>(row);
    m.per_class_accuracy.push_back(a);
    sum += a;
    ++present;
  }
  m.mean_class_accuracy = present ? sum / static_cast<double>(present) : 0.0;
  return m;
}

backbone::ForwardTrace infer(Model& model, const Tensor& images, std::size_t chunk) {
  const std::size_t n = images.dim(0);
  std::vector<Tensor> z, logits, fused;
  std::vector<std::vector<Tensor>> layers(model.spec().num_blocks()), maps(model.spec().num_blocks());
  for (std::size_t b = 0; b < n; b += chunk) {
    const auto t = model.forward(data::normalize(slice_batch(images, b, std::min(n, b + chunk))), BnMode::kEval);
    z.push_back(t.z);
    logits.push_back(t.logits);
    fused.push_back(t.fused);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].push_back(t.layer_logits[l]);
      maps[l].push_back(t.spatial_maps[l]);
    }
  }
  backbone::ForwardTrace out{concat_batch(z), concat_batch(logits), {}, concat_batch(fused), {}};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    out.layer_logits.push_back(concat_batch(layers[l]));
    out.spatial_maps.push_back(concat_batch(maps[l]));
  }
  return out;
}

std::vector<std::size_t> predict(Model& model, const Tensor& images) {
  const Tensor logits = infer(model, images).logits;
  std::vector<std::size_t> out(logits.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto r = logits.row(i);
    out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

Metrics evaluate(Model& model, const Dataset& labeled) {
  if (!labeled.labeled()) throw ConfigError("pipeline: evaluate needs a labeled dataset");
  if (!labeled.class_names.empty() && labeled.num_classes() != model.spec().num_classes) {
    throw ConfigError("pipeline: dataset has " + std::to_string(labeled.num_classes()) +
                      " classes but the checkpoint head has " + std::to_string(model.spec().num_classes));
  }
  check_images(labeled, model.spec(), "evaluation");
  return score(predict(model, labeled.images), *labeled.labels, model.spec().num_classes);
}

archive::Archive to_checkpoint(Model& model) {
  archive::Archive ar;
  ar.metadata = model.spec().to_metadata();
  ar.metadata["head.frozen"] = model.head().frozen() ? "1" : "0";
  model.visit_params([&](const std::string& name, Param& p) { ar.put(name, p.value); });
  model.visit_buffers([&](const std::string& name, Tensor& t) { ar.put(name, t); });
  return ar;
}

Model from_checkpoint(const archive::Archive& ar) {
  Model model(BlockSpec::from_metadata(ar.metadata), 0);
  auto load = [&](const std::string& name, Tensor& dst) {
    Tensor t = ar.tensor(name);
    if (t.shape() != dst.shape()) {
      throw IoError("pipeline: checkpoint entry '" + name + "' has shape " + shape_str(t.shape()) +
                    ", expected " + shape_str(dst.shape()));
    }
    dst = std::move(t);
  };
  model.visit_params([&](const std::string& name, Param& p) {
    load(name, p.value);
    p.zero_grad();
  });
  model.visit_buffers(load);
  auto it = ar.metadata.find("head.frozen");
  if (it != ar.metadata.end() && it->second == "1") model.head().freeze();
  return model;
}

void save_checkpoint(Model& model, const fs::path& path) { to_checkpoint(model).save(path); }

Model load_checkpoint(const fs::path& path) { return from_checkpoint(archive::Archive::load(path)); }

std::vector<std::uint8_t> head_bytes(const Model& model) {
  const Tensor& w = model.head().weight();
  const Tensor& b = model.head().bias();
  std::vector<std::uint8_t> out((w.size() + b.size()) * sizeof(double));
  std::memcpy(out.data(), w.ptr(), w.size() * sizeof(double));
  std::memcpy(out.data() + w.size() * sizeof(double), b.ptr(), b.size() * sizeof(double));
  return out;
}

}  // namespace arfnet::pipeline
