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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arfnet/tensor.hpp"

namespace arfnet::data {

/// Background clutter applied to the shifted domain.
enum class Texture : int {
  kNone = 0,
  kStripes = 1,
  kChecker = 2,
  kBlobs = 3,
};

/// How the target domain departs from the clean source rendering.
struct ShiftRecipe {
  Texture texture = Texture::kStripes;
  double texture_contrast = 0.35;
  double hue_degrees = 90.0;
  double blur_radius = 1.0;  // Gaussian sigma in pixels; 0 disables
  double noise_sigma = 0.08;

  static ShiftRecipe none() { return {Texture::kNone, 0.0, 0.0, 0.0, 0.0}; }
  bool is_identity() const;
};

struct DomainSpec {
  std::size_t num_classes = 5;
  std::size_t samples_per_class = 100;
  std::size_t image_size = 32;
  ShiftRecipe shift;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Images (N, 3, H, W) in [0, 1]. Sample id i is row i; ids index the
/// memory bank and must stay stable across epochs.
struct Dataset {
  Tensor images;
  std::optional<std::vector<std::size_t>> labels;
  std::vector<std::string> class_names;
  std::vector<std::string> paths;  // source files, when loaded from disk

  std::size_t size() const { return images.rank() == 4 ? images.dim(0) : 0; }
  std::size_t num_classes() const { return class_names.size(); }
  bool labeled() const { return labels.has_value(); }
};

/// Largest supported class count for procedural glyphs.
inline constexpr std::size_t kMaxGlyphClasses = 10;
const std::vector<std::string>& glyph_names();

struct DomainPair {
  Dataset source;
  Dataset target;
};

/// Renders the same glyph instances twice: clean for the source, under the
/// shift recipe for the target. Labels are stored on both; adaptation never
/// reads the target's. Sample i has class i mod K.
DomainPair gen_domain_pair(const DomainSpec& spec);

/// Per-channel normalization constants applied before the network.
inline constexpr std::array<double, 3> kChannelMean{0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kChannelStd{0.229, 0.224, 0.225};

/// (x - mean_c) / std_c over a (N, 3, H, W) batch.
Tensor normalize(const Tensor& images);

/// Rotates hue by `degrees` about the gray axis; a (3, H, W) or (N, 3, H, W)
/// tensor, clamped to [0, 1].
void rotate_hue(Tensor& images, double degrees);

/// Loads `root/<class>/<image>`; class ids follow lexicographic class-name
/// order and samples are sorted by path. Images are resized to
/// `image_size` x `image_size`. Empty class folders produce a warning on
/// stderr; unreadable files throw IoError naming the file.
Dataset load_folder_dataset(const std::filesystem::path& root, std::size_t image_size);

/// Writes the folder layout plus `manifest.csv` (id,path,label) under `root`.
void write_folder_dataset(const Dataset& ds, const std::filesystem::path& root);

}  // namespace arfnet::data
