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

#include "arfnet/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "arfnet/errors.hpp"

namespace arfnet::config {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

const KeySpec& lookup(const std::string& key) {
  for (const auto& k : schema()) {
    if (k.key == key) return k;
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

bool parse_uint(const std::string& s, std::uint64_t& out) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return false;
  }
  errno = 0;
  out = std::strtoull(s.c_str(), nullptr, 10);
  return errno == 0;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size() && std::isfinite(out);
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1") return out = true, true;
  if (s == "false" || s == "0") return out = false, true;
  return false;
}

bool parse_list(const std::string& s, std::vector<std::size_t>& out) {
  out.clear();
  if (s.empty()) return true;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::uint64_t v;
    if (!parse_uint(trim(item), v)) return false;
    out.push_back(static_cast<std::size_t>(v));
  }
  return true;
}

const char* type_name(ValueType t) {
  switch (t) {
    case ValueType::kUInt: return "a non-negative integer";
    case ValueType::kDouble: return "a finite number";
    case ValueType::kBool: return "true or false";
    case ValueType::kString: return "a string";
    case ValueType::kUIntList: return "a comma-separated list of non-negative integers";
  }
  return "?";
}

void check_value(const KeySpec& spec, const std::string& v) {
  bool ok = true;
  std::uint64_t u;
  double d;
  bool b;
  std::vector<std::size_t> l;
  switch (spec.type) {
    case ValueType::kUInt: ok = parse_uint(v, u); break;
    case ValueType::kDouble: ok = parse_double(v, d); break;
    case ValueType::kBool: ok = parse_bool(v, b); break;
    case ValueType::kString: break;
    case ValueType::kUIntList: ok = parse_list(v, l); break;
  }
  if (!ok) {
    throw ConfigError("config: key '" + spec.key + "' expects " + type_name(spec.type) + ", got '" + v + "'");
  }
}

data::Texture parse_texture(const std::string& s) {
  if (s == "none") return data::Texture::kNone;
  if (s == "stripes") return data::Texture::kStripes;
  if (s == "checker") return data::Texture::kChecker;
  if (s == "blobs") return data::Texture::kBlobs;
  throw ConfigError("config: key 'data.texture' must be one of none, stripes, checker, blobs; got '" + s + "'");
}

}  // namespace

const std::vector<KeySpec>& schema() {
  using T = ValueType;
  static const std::vector<KeySpec> keys = {
      {"seed", T::kUInt, "0", "seed for data generation, weight init and batch order"},
      {"data.num_classes", T::kUInt, "5", "class count K (synthetic glyphs support up to 10)"},
      {"data.samples_per_class", T::kUInt, "100", "synthetic images per class per domain"},
      {"data.image_size", T::kUInt, "32", "square image extent fed to the network"},
      {"data.texture", T::kString, "stripes", "target background: none, stripes, checker or blobs"},
      {"data.texture_contrast", T::kDouble, "0.35", "amplitude of the target background texture"},
      {"data.hue_degrees", T::kDouble, "90", "target hue rotation"},
      {"data.blur_radius", T::kDouble, "1", "target Gaussian blur sigma in pixels"},
      {"data.noise_sigma", T::kDouble, "0.08", "target additive Gaussian noise"},
      {"model.channels", T::kUIntList, "16,32,64,128", "output channels per residual block"},
      {"model.strides", T::kUIntList, "2,2,1,1", "stride per residual block"},
      {"model.reductions", T::kUIntList, "", "attention reduction per block; empty picks 16 for >= 64 channels, else 4"},
      {"model.stem_stride", T::kUInt, "2", "stride of the stem convolution"},
      {"model.latent_dim", T::kUInt, "128", "embedding width d"},
      {"pretrain.epochs", T::kUInt, "30", "source training epochs"},
      {"pretrain.batch_size", T::kUInt, "64", "source mini-batch size"},
      {"pretrain.lr", T::kDouble, "0.1", "source learning rate (constant)"},
      {"pretrain.momentum", T::kDouble, "0.9", "SGD momentum"},
      {"pretrain.weight_decay", T::kDouble, "0.001", "SGD weight decay"},
      {"pretrain.fit_layer_heads", T::kBool, "true", "also fit layer heads to source labels on detached gates"},
      {"pretrain.min_crop", T::kDouble, "0.5", "smallest random center-crop fraction for source augmentation; 1 disables"},
      {"adapt.epochs", T::kUInt, "15", "adaptation epochs"},
      {"adapt.batch_size", T::kUInt, "64", "adaptation mini-batch size"},
      {"adapt.lr", T::kDouble, "0.001", "adaptation learning rate (constant)"},
      {"adapt.momentum", T::kDouble, "0.9", "SGD momentum"},
      {"adapt.weight_decay", T::kDouble, "0.001", "SGD weight decay"},
      {"adapt.alpha", T::kDouble, "1", "self-distillation weight; 0 disables pseudo-labels"},
      {"adapt.beta", T::kDouble, "0.5", "global-local contrast weight; 0 disables the bank"},
      {"adapt.tau", T::kDouble, "0.07", "contrast temperature"},
      {"adapt.lambda", T::kDouble, "0.1", "centroid smoothing weight on the previous epoch"},
      {"adapt.crop_fraction", T::kDouble, "0.5", "local view side as a fraction of the image side"},
      {"adapt.kd_include_final", T::kBool, "true", "distil the last block's gate projection too"},
      {"export.ids", T::kUIntList, "", "sample ids for export-attention; empty means the first 8"},
      {"export.alpha", T::kDouble, "0.5", "overlay opacity of the attention heat map"},
  };
  return keys;
}

Config::Config() {
  for (const auto& k : schema()) values_[k.key] = k.default_value;
}

void Config::set(const std::string& key, const std::string& value) {
  const KeySpec& spec = lookup(key);
  const std::string v = trim(value);
  check_value(spec, v);
  values_[key] = v;
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("config: override '" + assignment + "' is not of the form key=value");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void Config::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: " + origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    set(trim(t.substr(0, eq)), t.substr(eq + 1));
  }
}

void Config::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path.string());
}

const std::string& Config::raw(const std::string& key) const {
  lookup(key);
  return values_.at(key);
}

std::uint64_t Config::get_uint(const std::string& key) const {
  std::uint64_t v = 0;
  if (lookup(key).type != ValueType::kUInt || !parse_uint(raw(key), v)) {
    throw ConfigError("config: key '" + key + "' is not an integer");
  }
  return v;
}

double Config::get_double(const std::string& key) const {
  double v = 0;
  if (lookup(key).type != ValueType::kDouble || !parse_double(raw(key), v)) {
    throw ConfigError("config: key '" + key + "' is not a number");
  }
  return v;
}

bool Config::get_bool(const std::string& key) const {
  bool v = false;
  if (lookup(key).type != ValueType::kBool || !parse_bool(raw(key), v)) {
    throw ConfigError("config: key '" + key + "' is not a boolean");
  }
  return v;
}

std::vector<std::size_t> Config::get_uint_list(const std::string& key) const {
  std::vector<std::size_t> v;
  if (lookup(key).type != ValueType::kUIntList || !parse_list(raw(key), v)) {
    throw ConfigError("config: key '" + key + "' is not an integer list");
  }
  return v;
}

std::string Config::dump() const {
  std::ostringstream out;
  for (const auto& k : schema()) out << k.key << " = " << values_.at(k.key) << '\n';
  return out.str();
}

data::DomainSpec Config::domain_spec() const {
  data::DomainSpec s;
  s.num_classes = get_uint("data.num_classes");
  s.samples_per_class = get_uint("data.samples_per_class");
  s.image_size = get_uint("data.image_size");
  s.shift.texture = parse_texture(raw("data.texture"));
  s.shift.texture_contrast = get_double("data.texture_contrast");
  s.shift.hue_degrees = get_double("data.hue_degrees");
  s.shift.blur_radius = get_double("data.blur_radius");
  s.shift.noise_sigma = get_double("data.noise_sigma");
  s.seed = get_uint("seed");
  s.validate();
  return s;
}

backbone::BlockSpec Config::block_spec() const {
  backbone::BlockSpec s;
  s.channels = get_uint_list("model.channels");
  s.strides = get_uint_list("model.strides");
  s.reductions = get_uint_list("model.reductions");
  s.stem_stride = get_uint("model.stem_stride");
  s.latent_dim = get_uint("model.latent_dim");
  s.input_size = get_uint("data.image_size");
  s.num_classes = get_uint("data.num_classes");
  s.validate();
  return s;
}

pipeline::TrainConfig Config::pretrain_config() const {
  pipeline::TrainConfig c;
  c.epochs = get_uint("pretrain.epochs");
  c.batch_size = get_uint("pretrain.batch_size");
  c.lr = get_double("pretrain.lr");
  c.momentum = get_double("pretrain.momentum");
  c.weight_decay = get_double("pretrain.weight_decay");
  c.fit_layer_heads = get_bool("pretrain.fit_layer_heads");
  c.min_crop = get_double("pretrain.min_crop");
  c.seed = get_uint("seed");
  c.validate();
  return c;
}

pipeline::TrainConfig Config::adapt_config() const {
  pipeline::TrainConfig c;
  c.epochs = get_uint("adapt.epochs");
  c.batch_size = get_uint("adapt.batch_size");
  c.lr = get_double("adapt.lr");
  c.momentum = get_double("adapt.momentum");
  c.weight_decay = get_double("adapt.weight_decay");
  c.weights.alpha = get_double("adapt.alpha");
  c.weights.beta = get_double("adapt.beta");
  c.tau = get_double("adapt.tau");
  c.lambda = get_double("adapt.lambda");
  c.crop_fraction = get_double("adapt.crop_fraction");
  c.kd_include_final = get_bool("adapt.kd_include_final");
  c.seed = get_uint("seed");
  c.validate();
  return c;
}

}  // namespace arfnet::config
