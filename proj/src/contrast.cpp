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

#include "arfnet/contrast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "arfnet/errors.hpp"

namespace arfnet::contrast {
namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMapRM = Eigen::Map<const MatRM>;

}  // namespace

void GacConfig::validate() const {
  ARFNET_CHECK_CONFIG(tau > 0.0 && std::isfinite(tau), "contrast: tau must be > 0");
  ARFNET_CHECK_CONFIG(crop_fraction > 0.0 && crop_fraction <= 1.0,
                      "contrast: crop_fraction must lie in (0, 1]");
}

CropWindow center_window(std::size_t height, std::size_t width, double crop_fraction) {
  if (!(crop_fraction > 0.0 && crop_fraction <= 1.0)) {
    throw ConfigError("contrast: crop_fraction must lie in (0, 1]");
  }
  const std::size_t shorter = std::min(height, width);
  const auto side = static_cast<std::size_t>(std::lround(crop_fraction * static_cast<double>(shorter)));
  if (side < 4) {
    throw ConfigError("contrast: center crop of " + std::to_string(side) +
                      " pixels is degenerate (need at least 4)");
  }
  return {(height - side) / 2, (width - side) / 2, side};
}

Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width) {
  if (image.rank() != 3) throw ConfigError("contrast: resize expects (C, H, W)");
  const std::size_t nc = image.dim(0), ih = image.dim(1), iw = image.dim(2);
  Tensor out({nc, height, width});
  const double sy = static_cast<double>(ih) / static_cast<double>(height);
  const double sx = static_cast<double>(iw) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(ih - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, ih - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(iw - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, iw - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < nc; ++c) {
        const double* p = image.ptr() + c * ih * iw;
        const double top = p[y0 * iw + x0] + wx * (p[y0 * iw + x1] - p[y0 * iw + x0]);
        const double bot = p[y1 * iw + x0] + wx * (p[y1 * iw + x1] - p[y1 * iw + x0]);
        out[(c * height + y) * width + x] = top + wy * (bot - top);
      }
    }
  }
  return out;
}

ViewPair make_views(const Tensor& image, double crop_fraction) {
  if (image.rank() != 3) throw ConfigError("contrast: make_views expects (C, H, W)");
  const std::size_t nc = image.dim(0), h = image.dim(1), w = image.dim(2);
  const CropWindow win = center_window(h, w, crop_fraction);
  Tensor crop({nc, win.side, win.side});
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t y = 0; y < win.side; ++y)
      for (std::size_t x = 0; x < win.side; ++x)
        crop[(c * win.side + y) * win.side + x] =
            image[(c * h + win.top + y) * w + win.left + x];
  return {image, resize_bilinear(crop, h, w)};
}

Tensor make_local_views(const Tensor& batch, double crop_fraction) {
  if (batch.rank() != 4) throw ConfigError("contrast: make_local_views expects (B, C, H, W)");
  Tensor out(batch.shape());
  const std::size_t per = batch.size() / batch.dim(0);
  for (std::size_t b = 0; b < batch.dim(0); ++b) {
    Tensor img({batch.dim(1), batch.dim(2), batch.dim(3)},
               std::vector<double>(batch.ptr() + b * per, batch.ptr() + (b + 1) * per));
    ViewPair v = make_views(img, crop_fraction);
    std::copy_n(v.local.ptr(), per, out.ptr() + b * per);
  }
  return out;
}

MemoryBank::MemoryBank(std::size_t capacity, std::size_t dim)
    : dim_(dim), globals_({capacity, dim}), locals_({capacity, dim}), initialized_(capacity, 0) {
  ARFNET_CHECK_CONFIG(capacity > 0 && dim > 0, "contrast: memory bank needs capacity and dim");
}

bool MemoryBank::all_initialized() const {
  return std::all_of(initialized_.begin(), initialized_.end(), [](std::uint8_t f) { return f != 0; });
}

void MemoryBank::update(std::span<const std::size_t> indices, const Tensor& globals,
                        const Tensor& locals) {
  if (globals.rank() != 2 || globals.shape() != locals.shape() ||
      globals.dim(0) != indices.size() || globals.dim(1) != dim_) {
    throw ConfigError("contrast: bank update expects two (" + std::to_string(indices.size()) +
                      ", " + std::to_string(dim_) + ") arrays");
  }
  std::vector<std::size_t> sorted(indices.begin(), indices.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("contrast: duplicate sample id in bank update");
  }
  for (std::size_t id : indices) {
    if (id >= capacity()) {
      throw ConfigError("contrast: sample id " + std::to_string(id) + " outside bank of " +
                        std::to_string(capacity()));
    }
  }
  auto store = [this](Tensor& dst, std::size_t slot, std::span<const double> src) {
    double n = 0.0;
    for (double v : src) n += v * v;
    n = std::sqrt(n);
    auto row = dst.row(slot);
    for (std::size_t j = 0; j < dim_; ++j) row[j] = n > 0.0 ? src[j] / n : src[j];
  };
  for (std::size_t r = 0; r < indices.size(); ++r) {
    store(globals_, indices[r], globals.row(r));
    store(locals_, indices[r], locals.row(r));
    initialized_[indices[r]] = 1;
  }
}

MemoryBank MemoryBank::restore(Tensor globals, Tensor locals, std::vector<std::uint8_t> flags) {
  if (globals.rank() != 2 || globals.shape() != locals.shape() || flags.size() != globals.dim(0)) {
    throw IoError("contrast: archived memory bank arrays are inconsistent");
  }
  MemoryBank bank;
  bank.dim_ = globals.dim(1);
  bank.globals_ = std::move(globals);
  bank.locals_ = std::move(locals);
  bank.initialized_ = std::move(flags);
  return bank;
}

GacResult gac_loss(const Tensor& globals, const Tensor& locals,
                   std::span<const std::size_t> indices, const MemoryBank& bank, double tau) {
  if (!(tau > 0.0)) throw ConfigError("contrast: temperature must be > 0");
  if (globals.rank() != 2 || globals.shape() != locals.shape() ||
      globals.dim(0) != indices.size() || globals.dim(1) != bank.dim() || indices.empty()) {
    throw ConfigError("contrast: gac_loss expects matching (B, d) global/local batches");
  }
  const std::size_t nb = globals.dim(0), d = globals.dim(1), n = bank.capacity();
  if (n < 2) throw ContractViolation("contrast: bank needs at least one negative slot");
  for (std::size_t id : indices) {
    if (id >= n) throw ConfigError("contrast: sample id outside bank");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!bank.initialized(j)) {
      throw ContractViolation("contrast: bank slot " + std::to_string(j) +
                              " read before initialization");
    }
  }

  // (B, n) anchor-to-key similarities.
  MatRM sim = CMapRM(locals.ptr(), nb, d) * CMapRM(bank.globals().ptr(), n, d).transpose();
  sim /= tau;

  GacResult out{0.0, Tensor(globals.shape()), Tensor(locals.shape())};
  const double inv_b = 1.0 / static_cast<double>(nb);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < nb; ++i) {
    double pos = 0.0;
    for (std::size_t k = 0; k < d; ++k) pos += globals[i * d + k] * locals[i * d + k];
    pos /= tau;

    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != indices[i]) m = std::max(m, sim(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      w[j] = j == indices[i] ? 0.0 : std::exp(sim(i, j) - m);
      s += w[j];
    }
    const double lse = m + std::log(s);
    out.value += (lse - pos) * inv_b;

    for (std::size_t k = 0; k < d; ++k) {
      out.grad_global[i * d + k] = -locals[i * d + k] / tau * inv_b;
      double neg = 0.0;
      for (std::size_t j = 0; j < n; ++j) neg += w[j] * bank.globals()[j * d + k];
      out.grad_local[i * d + k] = (neg / s - globals[i * d + k]) / tau * inv_b;
    }
  }
  return out;
}

}  // namespace arfnet::contrast
