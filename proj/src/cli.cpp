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

#include "arfnet/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "arfnet/config.hpp"
#include "arfnet/contrast.hpp"
#include "arfnet/data.hpp"
#include "arfnet/errors.hpp"
#include "arfnet/image_io.hpp"
#include "arfnet/pipeline.hpp"

namespace arfnet::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string command;
  std::string config_path;
  std::vector<std::string> sets;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string checkpoint;
  std::string data;
  std::string split = "target";
  bool resume = false;
};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Exclusive lock file inside the output directory, removed on scope exit.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      throw ConfigError("cli: output directory '" + dir.string() + "' is locked by another run (remove " +
                        path_.string() + " if stale)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd, pid.data(), pid.size()) < 0) {
      ::close(fd);
      throw IoError("cli: cannot write lock file '" + path_.string() + "'");
    }
    ::close(fd);
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

config::Config load_config(const Options& o) {
  config::Config cfg;
  if (!o.config_path.empty()) cfg.merge_file(o.config_path);
  for (const auto& s : o.sets) cfg.apply_override(s);
  if (o.seed) cfg.set("seed", std::to_string(*o.seed));
  return cfg;
}

/// Config echo plus manifest; `finish` fills the end timestamp.
class RunRecord {
 public:
  RunRecord(const Options& o, const config::Config& cfg, const fs::path& out) : out_(out) {
    std::ofstream(out_ / "config.txt") << cfg.dump();
    manifest_["command"] = o.command;
    manifest_["seed"] = cfg.get_uint("seed");
    manifest_["version"] = ARFNET_VERSION;
    manifest_["config"] = cfg.dump();
    manifest_["started"] = utc_now();
    if (!o.checkpoint.empty()) manifest_["checkpoint"] = o.checkpoint;
    if (!o.data.empty()) manifest_["data"] = o.data;
    write();
  }
  json& extra() { return manifest_; }
  void finish() {
    manifest_["finished"] = utc_now();
    write();
  }

 private:
  void write() const {
    std::ofstream f(out_ / "manifest.json");
    if (!f) throw IoError("cli: cannot write manifest under '" + out_.string() + "'");
    f << manifest_.dump(2) << '\n';
  }
  fs::path out_;
  json manifest_;
};

fs::path require_out(const Options& o) {
  if (o.out.empty()) throw ConfigError("cli: " + o.command + " needs --out DIR");
  return o.out;
}

void require_checkpoint(const Options& o) {
  if (o.checkpoint.empty()) throw ConfigError("cli: " + o.command + " needs --checkpoint PATH");
}

/// Folder dataset under --data, or the configured synthetic split.
data::Dataset load_data(const Options& o, const config::Config& cfg, const std::string& split,
                        std::size_t image_size) {
  if (!o.data.empty()) return data::load_folder_dataset(o.data, image_size);
  if (split != "source" && split != "target") {
    throw ConfigError("cli: --split must be 'source' or 'target', got '" + split + "'");
  }
  auto pair = data::gen_domain_pair(cfg.domain_spec());
  return split == "source" ? std::move(pair.source) : std::move(pair.target);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json metrics_json(const pipeline::Metrics& m) {
  json j;
  j["count"] = m.count;
  j["accuracy"] = m.accuracy;
  j["mean_class_accuracy"] = m.mean_class_accuracy;
  json per = json::array();
  for (double a : m.per_class_accuracy) per.push_back(std::isnan(a) ? json(nullptr) : json(a));
  j["per_class_accuracy"] = per;
  j["confusion"] = m.confusion;
  return j;
}

int cmd_gen_data(const Options& o) {
  const auto cfg = load_config(o);
  const fs::path out = require_out(o);
  const auto spec = cfg.domain_spec();
  DirLock lock(out);
  RunRecord rec(o, cfg, out);
  const auto pair = data::gen_domain_pair(spec);
  data::write_folder_dataset(pair.source, out / "source");
  data::write_folder_dataset(pair.target, out / "target");
  rec.extra()["samples"] = pair.source.size();
  rec.finish();
  std::cout << "wrote " << pair.source.size() << " source and " << pair.target.size() << " target images to "
            << out.string() << '\n';
  return kExitOk;
}

pipeline::RunOptions run_options(const Options& o, const fs::path& out) {
  pipeline::RunOptions r;
  r.metrics_csv = out / "metrics.csv";
  r.state_path = out / "state.arc";
  if (o.resume) {
    if (!fs::exists(r.state_path)) throw ConfigError("cli: --resume but no state archive at " + r.state_path.string());
    r.resume_from = r.state_path;
  }
  r.on_epoch = [](const pipeline::EpochSummary& s, pipeline::Model&) {
    std::cerr << "epoch " << s.epoch << " im " << s.mean.im << " ce " << s.mean.ce << " kd " << s.mean.kd
              << " gac " << s.mean.gac << " total " << s.mean.total << '\n';
  };
  return r;
}

int cmd_pretrain(const Options& o) {
  const auto cfg = load_config(o);
  const fs::path out = require_out(o);
  const auto spec = cfg.block_spec();
  const auto train = cfg.pretrain_config();
  train.validate();
  DirLock lock(out);
  RunRecord rec(o, cfg, out);
  const auto source = load_data(o, cfg, "source", spec.input_size);
  auto model = pipeline::pretrain_source(source, spec, train, run_options(o, out));
  pipeline::save_checkpoint(model, out / "model.ckpt");
  const auto m = pipeline::evaluate(model, source);
  rec.extra()["source_accuracy"] = m.accuracy;
  rec.finish();
  std::cout << "source accuracy " << fmt(m.accuracy) << '\n';
  return kExitOk;
}

int cmd_adapt(const Options& o) {
  require_checkpoint(o);
  const auto cfg = load_config(o);
  const fs::path out = require_out(o);
  const auto train = cfg.adapt_config();
  train.validate();
  auto source = pipeline::load_checkpoint(o.checkpoint);
  DirLock lock(out);
  RunRecord rec(o, cfg, out);
  data::Dataset target = load_data(o, cfg, "target", source.spec().input_size);
  const auto labels = target.labels;
  target.labels.reset();
  auto opts = run_options(o, out);
  opts.centroid_csv = out / "centroids.csv";
  auto model = pipeline::adapt(std::move(source), target, train, opts);
  pipeline::save_checkpoint(model, out / "model.ckpt");
  if (labels) {
    target.labels = labels;
    const auto m = pipeline::evaluate(model, target);
    rec.extra()["target_accuracy"] = m.accuracy;
    std::cout << "target accuracy " << fmt(m.accuracy) << '\n';
  }
  rec.finish();
  return kExitOk;
}

int cmd_eval(const Options& o) {
  require_checkpoint(o);
  const auto cfg = load_config(o);
  auto model = pipeline::load_checkpoint(o.checkpoint);
  const auto ds = load_data(o, cfg, o.split, model.spec().input_size);
  const auto m = pipeline::evaluate(model, ds);
  std::cout << "accuracy " << fmt(m.accuracy) << '\n';
  std::cout << "mean_class_accuracy " << fmt(m.mean_class_accuracy) << '\n';
  if (!o.out.empty()) {
    const fs::path out = o.out;
    DirLock lock(out);
    RunRecord rec(o, cfg, out);
    std::ofstream(out / "eval.json") << metrics_json(m).dump(2) << '\n';
    rec.finish();
  }
  return kExitOk;
}

std::vector<std::size_t> pick_ids(const config::Config& cfg, std::size_t n) {
  std::vector<std::size_t> ids = cfg.get_uint_list("export.ids");
  if (ids.empty()) {
    for (std::size_t i = 0; i < std::min<std::size_t>(8, n); ++i) ids.push_back(i);
  }
  for (std::size_t id : ids) {
    if (id >= n) {
      throw ConfigError("cli: export.ids entry " + std::to_string(id) + " exceeds dataset size " + std::to_string(n));
    }
  }
  return ids;
}

std::array<double, 3> heat(double t) {
  auto ramp = [](double v) { return std::clamp(1.5 - std::abs(v), 0.0, 1.0); };
  return {ramp(4 * t - 3), ramp(4 * t - 2), ramp(4 * t - 1)};
}

int cmd_export_attention(const Options& o) {
  require_checkpoint(o);
  const auto cfg = load_config(o);
  const fs::path out = require_out(o);
  const double alpha = cfg.get_double("export.alpha");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("cli: export.alpha must lie in [0, 1]");
  auto model = pipeline::load_checkpoint(o.checkpoint);
  const auto ds = load_data(o, cfg, o.split, model.spec().input_size);
  const auto ids = pick_ids(cfg, ds.size());
  DirLock lock(out);
  RunRecord rec(o, cfg, out);
  const std::size_t h = ds.images.dim(2), w = ds.images.dim(3), per = 3 * h * w;
  Tensor batch({ids.size(), 3, h, w});
  for (std::size_t b = 0; b < ids.size(); ++b) {
    std::copy_n(ds.images.ptr() + ids[b] * per, per, batch.ptr() + b * per);
  }
  const auto trace = pipeline::infer(model, batch);
  fs::create_directories(out / "attention");
  std::size_t written = 0;
  for (std::size_t l = 0; l < trace.spatial_maps.size(); ++l) {
    const Tensor& maps = trace.spatial_maps[l];
    const std::size_t c = maps.dim(1), mh = maps.dim(2), mw = maps.dim(3);
    for (std::size_t b = 0; b < ids.size(); ++b) {
      Tensor mean({1, mh, mw});
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < mh * mw; ++p) mean[p] += maps[(b * c + ch) * mh * mw + p] / c;
      Tensor up = contrast::resize_bilinear(mean, h, w);
      const auto [lo, hi] = std::minmax_element(up.storage().begin(), up.storage().end());
      const double low = *lo, span = *hi - *lo;
      Tensor img({3, h, w});
      for (std::size_t p = 0; p < h * w; ++p) {
        const auto rgb = heat(span > 0 ? (up[p] - low) / span : 0.0);
        for (std::size_t ch = 0; ch < 3; ++ch) {
          img[ch * h * w + p] = (1 - alpha) * batch[b * per + ch * h * w + p] + alpha * rgb[ch];
        }
      }
      char name[64];
      std::snprintf(name, sizeof(name), "sample%06zu_block%zu.png", ids[b], l);
      image_io::write_image(out / "attention" / name, img);
      ++written;
    }
  }
  rec.extra()["images"] = written;
  rec.finish();
  std::cout << "wrote " << written << " overlays to " << (out / "attention").string() << '\n';
  return kExitOk;
}

int cmd_export_embeddings(const Options& o) {
  require_checkpoint(o);
  const auto cfg = load_config(o);
  const fs::path out = require_out(o);
  auto model = pipeline::load_checkpoint(o.checkpoint);
  const auto ds = load_data(o, cfg, o.split, model.spec().input_size);
  DirLock lock(out);
  RunRecord rec(o, cfg, out);
  const Tensor z = pipeline::infer(model, ds.images).z;
  std::ofstream f(out / "embeddings.csv");
  if (!f) throw IoError("cli: cannot write embeddings under '" + out.string() + "'");
  const std::size_t d = z.dim(1);
  f << "id,label";
  for (std::size_t j = 0; j < d; ++j) f << ",z" << j;
  f << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    f << i << ',';
    if (ds.labeled()) f << (*ds.labels)[i];
    for (std::size_t j = 0; j < d; ++j) f << ',' << fmt(z.at(i, j));
    f << '\n';
  }
  rec.extra()["rows"] = ds.size();
  rec.finish();
  std::cout << "wrote " << ds.size() << " embeddings of width " << d << '\n';
  return kExitOk;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config_path, "key = value config file");
  sub->add_option("--set", o.sets, "override one key, key=value (repeatable)")->allow_extra_args(false);
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--seed", o.seed, "shorthand for --set seed=N");
}

void add_input(CLI::App* sub, Options& o) {
  sub->add_option("--checkpoint", o.checkpoint, "model checkpoint archive");
  sub->add_option("--data", o.data, "folder dataset root/<class>/<image>; synthetic data when absent");
  sub->add_option("--split", o.split, "synthetic split when --data is absent: source or target");
}

int dispatch(const Options& o) {
  if (o.command == "gen-data") return cmd_gen_data(o);
  if (o.command == "pretrain") return cmd_pretrain(o);
  if (o.command == "adapt") return cmd_adapt(o);
  if (o.command == "eval") return cmd_eval(o);
  if (o.command == "export-attention") return cmd_export_attention(o);
  return cmd_export_embeddings(o);
}

}  // namespace

int run(int argc, const char* const* argv) {
  Options o;
  CLI::App app{"Source-free domain adaptation with attention-enhanced features", "arfnet"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", ARFNET_VERSION);

  auto* gen = app.add_subcommand("gen-data", "write a synthetic source/target pair as folder datasets");
  add_common(gen, o);

  auto* pre = app.add_subcommand("pretrain", "train backbone and head on labeled source data");
  add_common(pre, o);
  pre->add_option("--data", o.data, "labeled folder dataset; synthetic source when absent");
  pre->add_flag("--resume", o.resume, "continue from <out>/state.arc");

  auto* ad = app.add_subcommand("adapt", "adapt a source checkpoint to unlabeled target data");
  add_common(ad, o);
  ad->add_option("--checkpoint", o.checkpoint, "source checkpoint archive")->required();
  ad->add_option("--data", o.data, "target folder dataset; synthetic target when absent");
  ad->add_flag("--resume", o.resume, "continue from <out>/state.arc");

  auto* ev = app.add_subcommand("eval", "report accuracy of a checkpoint on labeled data");
  add_common(ev, o);
  add_input(ev, o);

  auto* att = app.add_subcommand("export-attention", "write spatial attention overlays per block");
  add_common(att, o);
  add_input(att, o);

  auto* emb = app.add_subcommand("export-embeddings", "dump id, label and latent z per sample as CSV");
  add_common(emb, o);
  add_input(emb, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  o.command = app.get_subcommands().front()->get_name();

  try {
    return dispatch(o);
  } catch (const ContractViolation& e) {
    std::cerr << "arfnet " << o.command << ": contract violation: " << e.what() << '\n';
    return kExitFailure;
  } catch (const ConfigError& e) {
    std::cerr << "arfnet " << o.command << ": config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "arfnet " << o.command << ": input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "arfnet " << o.command << ": " << e.what() << '\n';
    return kExitFailure;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"arfnet"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace arfnet::cli
