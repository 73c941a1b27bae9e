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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "arfnet/tensor.hpp"

// Global/local views, the per-sample embedding bank, and the global-local
// attention contrast loss.
namespace arfnet::contrast {

struct GacConfig {
  double tau = 0.07;
  double crop_fraction = 0.5;

  void validate() const;
};

/// Square center window of side round(fraction * min(H, W)).
struct CropWindow {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t side = 0;
};
CropWindow center_window(std::size_t height, std::size_t width, double crop_fraction);

/// Bilinear resize of a (C, H, W) image (half-pixel centers, edge clamp).
Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width);

struct ViewPair {
  Tensor global;  // (C, H, W), the input unchanged
  Tensor local;   // (C, H, W), center crop resized back to (H, W)
};

/// `image` is (C, H, W). crop_fraction in (0, 1]; the crop must be at least
/// 4 pixels wide.
ViewPair make_views(const Tensor& image, double crop_fraction);

/// Local views for a (B, C, H, W) batch.
Tensor make_local_views(const Tensor& batch, double crop_fraction);

/// One (global, local) embedding pair per dataset sample; slot i always holds
/// sample id i. Rows are stored unit-normalized.
class MemoryBank {
 public:
  MemoryBank() = default;
  MemoryBank(std::size_t capacity, std::size_t dim);

  std::size_t capacity() const { return initialized_.size(); }
  std::size_t dim() const { return dim_; }

  /// Writes row r of `globals`/`locals` into slot indices[r]. Indices must be
  /// unique and in range.
  void update(std::span<const std::size_t> indices, const Tensor& globals,
              const Tensor& locals);

  bool initialized(std::size_t slot) const { return initialized_.at(slot) != 0; }
  bool all_initialized() const;

  std::span<const double> global(std::size_t slot) const { return globals_.row(slot); }
  std::span<const double> local(std::size_t slot) const { return locals_.row(slot); }

  const Tensor& globals() const { return globals_; }
  const Tensor& locals() const { return locals_; }
  const std::vector<std::uint8_t>& initialized_flags() const { return initialized_; }

  /// Rebuilds a bank from archived arrays.
  static MemoryBank restore(Tensor globals, Tensor locals, std::vector<std::uint8_t> flags);

 private:
  std::size_t dim_ = 0;
  Tensor globals_;
  Tensor locals_;
  std::vector<std::uint8_t> initialized_;
};

struct GacResult {
  double value = 0.0;
  Tensor grad_global;  // d loss / d globals, (B, d)
  Tensor grad_local;   // d loss / d locals, (B, d)
};

/// -mean_i log( exp(g_i . l_i / tau) / sum_{j != id_i} exp(l_i . G_j / tau) )
/// where G_j are the bank's stored global embeddings over every slot except
/// the sample's own. The positive pair uses the fresh in-batch embeddings.
GacResult gac_loss(const Tensor& globals, const Tensor& locals,
                   std::span<const std::size_t> indices, const MemoryBank& bank,
                   double tau);

}  // namespace arfnet::contrast
