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

#include "arfnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>

#include "arfnet/contrast.hpp"
#include "arfnet/errors.hpp"
#include "arfnet/image_io.hpp"

namespace arfnet::data {
namespace {

namespace fs = std::filesystem;
using Rng = std::mt19937_64;

constexpr std::uint64_t kShiftStream = 0x9e3779b97f4a7c15ULL;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double hh = std::fmod(h, 1.0) * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

// Glyph membership in local coordinates (u right, v up), unit radius.
bool inside_glyph(std::size_t cls, double u, double v) {
  const double au = std::abs(u), av = std::abs(v);
  const double r2 = u * u + v * v;
  switch (cls) {
    case 0: return r2 <= 1.0;                                            // disk
    case 1: return std::max(au, av) <= 0.82;                             // square
    case 2: return v >= -0.6 && au <= (1.0 - v) * 0.6;                   // triangle
    case 3: return (au <= 0.3 && av <= 1.0) || (av <= 0.3 && au <= 1.0);  // plus
    case 4: return r2 <= 1.0 && r2 >= 0.36;                              // ring
    case 5: return std::max(au, av) <= 0.88 && std::max(au, av) >= 0.5;  // frame
    case 6: {                                                            // cross
      const double a = std::abs(u + v) * std::numbers::sqrt2 / 2;
      const double b = std::abs(u - v) * std::numbers::sqrt2 / 2;
      return (a <= 0.27 && b <= 1.0) || (b <= 0.27 && a <= 1.0);
    }
    case 7: return au + av <= 1.0;                                       // diamond
    case 8: return av <= 0.35 && au <= 1.0;                              // bar
    default: return (u + 0.45) * (u + 0.45) + v * v <= 0.2 ||            // dots
                    (u - 0.45) * (u - 0.45) + v * v <= 0.2;
  }
}

struct Glyph {
  std::size_t cls;
  double cx, cy, radius, theta;
  std::array<double, 3> fg, bg;
};

struct Clutter {
  double angle, period, phase, cell;
  std::array<double, 3> color;
  std::array<std::array<double, 4>, 4> blobs;  // x, y, sigma, sign
};

Glyph draw_glyph(Rng& rng, std::size_t cls, std::size_t size) {
  const double s = static_cast<double>(size);
  Glyph g;
  g.cls = cls;
  g.cx = s / 2 + uniform(rng, -3, 3) * s / 32;
  g.cy = s / 2 + uniform(rng, -3, 3) * s / 32;
  g.radius = uniform(rng, 0.26, 0.34) * s;
  g.theta = uniform(rng, -0.35, 0.35);
  g.fg = hsv_to_rgb(uniform(rng, 0, 1), uniform(rng, 0.55, 1.0), uniform(rng, 0.7, 1.0));
  const double gray = uniform(rng, 0.05, 0.3);
  for (auto& c : g.bg) c = std::clamp(gray + uniform(rng, -0.03, 0.03), 0.0, 1.0);
  return g;
}

Clutter draw_clutter(Rng& rng, std::size_t size) {
  const double s = static_cast<double>(size) / 32.0;
  Clutter c;
  c.angle = uniform(rng, 0, std::numbers::pi);
  c.period = uniform(rng, 4, 8) * s;
  c.phase = uniform(rng, 0, 2 * std::numbers::pi);
  c.cell = uniform(rng, 3, 6) * s;
  c.color = hsv_to_rgb(uniform(rng, 0, 1), uniform(rng, 0.3, 0.9), uniform(rng, 0.6, 1.0));
  for (auto& b : c.blobs) {
    b = {uniform(rng, 0, 32) * s, uniform(rng, 0, 32) * s, uniform(rng, 3, 7) * s,
         uniform(rng, 0, 1) < 0.5 ? -1.0 : 1.0};
  }
  return c;
}

double clutter_value(const Clutter& c, Texture t, double x, double y) {
  switch (t) {
    case Texture::kStripes: {
      const double proj = x * std::cos(c.angle) + y * std::sin(c.angle);
      return std::sin(2 * std::numbers::pi * proj / c.period + c.phase);
    }
    case Texture::kChecker: {
      const auto ix = static_cast<long>(std::floor(x / c.cell));
      const auto iy = static_cast<long>(std::floor(y / c.cell));
      return ((ix + iy) % 2 == 0) ? 1.0 : -1.0;
    }
    case Texture::kBlobs: {
      double v = 0.0;
      for (const auto& b : c.blobs) {
        const double d2 = (x - b[0]) * (x - b[0]) + (y - b[1]) * (y - b[1]);
        v += b[3] * std::exp(-d2 / (2 * b[2] * b[2]));
      }
      return std::clamp(v, -1.0, 1.0);
    }
    case Texture::kNone:
      break;
  }
  return 0.0;
}

// Fraction of a pixel covered by the glyph, 3x3 supersampled.
double coverage(const Glyph& g, double px, double py) {
  const double ct = std::cos(g.theta), st = std::sin(g.theta);
  int hits = 0;
  for (int sy = 0; sy < 3; ++sy)
    for (int sx = 0; sx < 3; ++sx) {
      const double x = px + (sx + 0.5) / 3.0 - g.cx;
      const double y = py + (sy + 0.5) / 3.0 - g.cy;
      const double u = (ct * x + st * y) / g.radius;
      const double v = -(-st * x + ct * y) / g.radius;
      hits += inside_glyph(g.cls, u, v) ? 1 : 0;
    }
  return hits / 9.0;
}

void render(const Glyph& g, const Clutter* clutter, Texture texture, double contrast,
            std::size_t size, double* out) {
  const std::size_t plane = size * size;
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double a = coverage(g, static_cast<double>(x), static_cast<double>(y));
      double t = 0.0;
      if (clutter != nullptr) {
        t = clutter_value(*clutter, texture, x + 0.5, y + 0.5);
      }
      for (std::size_t c = 0; c < 3; ++c) {
        double bg = g.bg[c];
        if (clutter != nullptr) bg = std::clamp(bg + contrast * (0.5 + 0.5 * t) * clutter->color[c], 0.0, 1.0);
        out[c * plane + y * size + x] = bg * (1.0 - a) + g.fg[c] * a;
      }
    }
}

void gaussian_blur(double* img, std::size_t size, double sigma) {
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * radius + 1);
  double ks = 0.0;
  for (int i = -radius; i <= radius; ++i) ks += k[i + radius] = std::exp(-i * i / (2 * sigma * sigma));
  for (auto& v : k) v /= ks;
  const long n = static_cast<long>(size);
  std::vector<double> tmp(size * size);
  for (std::size_t c = 0; c < 3; ++c) {
    double* p = img + c * size * size;
    for (long y = 0; y < n; ++y)
      for (long x = 0; x < n; ++x) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) s += k[i + radius] * p[y * n + std::clamp(x + i, 0L, n - 1)];
        tmp[y * n + x] = s;
      }
    for (long y = 0; y < n; ++y)
      for (long x = 0; x < n; ++x) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp[std::clamp(y + i, 0L, n - 1) * n + x];
        p[y * n + x] = s;
      }
  }
}

}  // namespace

bool ShiftRecipe::is_identity() const {
  return (texture == Texture::kNone || texture_contrast == 0.0) && hue_degrees == 0.0 &&
         blur_radius == 0.0 && noise_sigma == 0.0;
}

void DomainSpec::validate() const {
  ARFNET_CHECK_CONFIG(num_classes >= 2 && num_classes <= kMaxGlyphClasses,
                      "data: num_classes must lie in [2, " + std::to_string(kMaxGlyphClasses) + "]");
  ARFNET_CHECK_CONFIG(samples_per_class >= 1, "data: samples_per_class must be positive");
  ARFNET_CHECK_CONFIG(image_size >= 8, "data: image_size below 8 cannot render glyphs");
  ARFNET_CHECK_CONFIG(shift.blur_radius >= 0.0 && shift.noise_sigma >= 0.0 &&
                          shift.texture_contrast >= 0.0,
                      "data: shift recipe magnitudes must be nonnegative");
  const int t = static_cast<int>(shift.texture);
  ARFNET_CHECK_CONFIG(t >= 0 && t <= 3, "data: unknown texture id " + std::to_string(t));
}

const std::vector<std::string>& glyph_names() {
  static const std::vector<std::string> names{"disk", "square", "triangle", "plus", "ring",
                                              "frame", "cross", "diamond", "bar", "dots"};
  return names;
}

DomainPair gen_domain_pair(const DomainSpec& spec) {
  spec.validate();
  const std::size_t k = spec.num_classes, n = k * spec.samples_per_class, s = spec.image_size;
  Rng glyph_rng(spec.seed);
  Rng shift_rng(spec.seed ^ kShiftStream);

  DomainPair pair;
  // Numeric prefixes keep folder order equal to label order.
  std::vector<std::string> names;
  for (std::size_t c = 0; c < k; ++c) names.push_back(std::to_string(c) + "_" + glyph_names()[c]);
  std::vector<std::size_t> labels(n);
  pair.source.images = Tensor({n, 3, s, s});
  pair.target.images = Tensor({n, 3, s, s});
  const std::size_t per = 3 * s * s;
  const bool shifted = !spec.shift.is_identity();
  std::normal_distribution<double> noise(0.0, 1.0);

  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i % k;
    const Glyph g = draw_glyph(glyph_rng, labels[i], s);
    const Clutter c = draw_clutter(shift_rng, s);
    double* src = pair.source.images.ptr() + i * per;
    double* tgt = pair.target.images.ptr() + i * per;
    render(g, nullptr, Texture::kNone, 0.0, s, src);
    if (!shifted) {
      std::copy_n(src, per, tgt);
      continue;
    }
    const bool textured = spec.shift.texture != Texture::kNone && spec.shift.texture_contrast > 0.0;
    render(g, textured ? &c : nullptr, spec.shift.texture, spec.shift.texture_contrast, s, tgt);
    if (spec.shift.hue_degrees != 0.0) {
      Tensor img({3, s, s}, std::vector<double>(tgt, tgt + per));
      rotate_hue(img, spec.shift.hue_degrees);
      std::copy_n(img.ptr(), per, tgt);
    }
    if (spec.shift.blur_radius > 0.0) gaussian_blur(tgt, s, spec.shift.blur_radius);
    if (spec.shift.noise_sigma > 0.0) {
      for (std::size_t j = 0; j < per; ++j) {
        tgt[j] = std::clamp(tgt[j] + spec.shift.noise_sigma * noise(shift_rng), 0.0, 1.0);
      }
    }
  }
  pair.source.labels = labels;
  pair.target.labels = labels;
  pair.source.class_names = names;
  pair.target.class_names = names;
  return pair;
}

Tensor normalize(const Tensor& images) {
  if (images.rank() != 4 || images.dim(1) != 3) {
    throw ConfigError("data: normalize expects (N, 3, H, W), got " + shape_str(images.shape()));
  }
  Tensor out = images;
  const std::size_t plane = images.dim(2) * images.dim(3);
  for (std::size_t n = 0; n < images.dim(0); ++n)
    for (std::size_t c = 0; c < 3; ++c) {
      double* p = out.ptr() + (n * 3 + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - kChannelMean[c]) / kChannelStd[c];
    }
  return out;
}

void rotate_hue(Tensor& images, double degrees) {
  const bool batched = images.rank() == 4;
  if (!(batched || images.rank() == 3) || images.dim(batched ? 1 : 0) != 3) {
    throw ConfigError("data: rotate_hue expects RGB images");
  }
  const double a = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a), t = (1.0 - c) / 3.0, r = std::sqrt(1.0 / 3.0) * s;
  const double m[3][3] = {{c + t, t - r, t + r}, {t + r, c + t, t - r}, {t - r, t + r, c + t}};
  const std::size_t count = batched ? images.dim(0) : 1;
  const std::size_t plane = images.size() / count / 3;
  for (std::size_t n = 0; n < count; ++n) {
    double* p = images.ptr() + n * 3 * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const double rgb[3] = {p[i], p[plane + i], p[2 * plane + i]};
      for (int k = 0; k < 3; ++k) {
        p[k * plane + i] = std::clamp(m[k][0] * rgb[0] + m[k][1] * rgb[1] + m[k][2] * rgb[2], 0.0, 1.0);
      }
    }
  }
}

Dataset load_folder_dataset(const fs::path& root, std::size_t image_size) {
  if (!fs::is_directory(root)) {
    throw IoError("data: dataset root '" + root.string() + "' is not a directory");
  }
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) class_dirs.push_back(e.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw IoError("data: no class folders under '" + root.string() + "'");

  Dataset ds;
  std::vector<Tensor> images;
  std::vector<std::size_t> labels;
  for (std::size_t label = 0; label < class_dirs.size(); ++label) {
    ds.class_names.push_back(class_dirs[label].filename().string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[label])) {
      if (e.is_regular_file() && image_io::is_supported_image(e.path())) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      std::cerr << "warning: data: class folder '" << class_dirs[label].string()
                << "' has no images\n";
    }
    for (const auto& f : files) {
      Tensor img = image_io::read_image(f);
      if (img.dim(1) != image_size || img.dim(2) != image_size) {
        img = contrast::resize_bilinear(img, image_size, image_size);
      }
      images.push_back(img.reshaped({1, 3, image_size, image_size}));
      labels.push_back(label);
      ds.paths.push_back(fs::relative(f, root).generic_string());
    }
  }
  if (images.empty()) throw IoError("data: no images under '" + root.string() + "'");
  ds.images = concat_batch(images);
  ds.labels = std::move(labels);
  return ds;
}

void write_folder_dataset(const Dataset& ds, const fs::path& root) {
  if (!ds.labeled()) throw ConfigError("data: folder layout needs labels to pick class folders");
  fs::create_directories(root);
  for (const auto& name : ds.class_names) fs::create_directories(root / name);
  std::ofstream manifest(root / "manifest.csv");
  if (!manifest) throw IoError("data: cannot write manifest under '" + root.string() + "'");
  manifest << "id,path,label\n";
  const std::size_t h = ds.images.dim(2), w = ds.images.dim(3), per = 3 * h * w;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::size_t label = (*ds.labels)[i];
    char file[32];
    std::snprintf(file, sizeof(file), "%06zu.png", i);
    const fs::path rel = fs::path(ds.class_names.at(label)) / file;
    Tensor img({3, h, w}, std::vector<double>(ds.images.ptr() + i * per, ds.images.ptr() + (i + 1) * per));
    image_io::write_image(root / rel, img);
    manifest << i << ',' << rel.generic_string() << ',' << label << '\n';
  }
}

}  // namespace arfnet::data
