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
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arfnet/archive.hpp"
#include "arfnet/backbone.hpp"
#include "arfnet/data.hpp"
#include "arfnet/losses.hpp"

namespace arfnet::pipeline {

using backbone::BlockSpec;
using backbone::Model;
using data::Dataset;

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  losses::LossWeights weights;
  double tau = 0.07;
  double lambda = 0.1;
  double crop_fraction = 0.5;
  std::uint64_t seed = 0;
  /// Distil the last block's gate projection as well as the earlier ones.
  bool kd_include_final = true;
  /// Pretraining also fits each layer head to the source labels on its
  /// detached gate, leaving backbone gradients to the output loss alone.
  bool fit_layer_heads = true;
  /// Pretraining replaces half of each batch with random center crops whose
  /// side fraction is drawn from [min_crop, 1]; 1 disables the augmentation.
  double min_crop = 1.0;

  void validate() const;
  /// Flat key/value echo stored in training-state archives.
  std::map<std::string, std::string> to_metadata() const;
};

struct EpochSummary {
  std::size_t epoch = 0;   // 1-based count of completed epochs
  std::size_t steps = 0;
  losses::LossReport mean;  // per-step average over the epoch
};

struct RunOptions {
  /// Per-step CSV "step,epoch,im,ce,kd,gac,total"; empty disables.
  std::filesystem::path metrics_csv;
  /// Training-state archive rewritten after every epoch; empty disables.
  std::filesystem::path state_path;
  /// Continue from a training-state archive written by the same phase.
  std::optional<std::filesystem::path> resume_from;
  /// Return early once this many epochs are complete (state is saved).
  std::optional<std::size_t> stop_after_epochs;
  /// Per-epoch pseudo-label diagnostics (adapt only); empty disables.
  std::filesystem::path centroid_csv;
  std::function<void(const EpochSummary&, Model&)> on_epoch;
};

/// Minimizes source cross-entropy over the labeled set with momentum SGD.
/// Initial weights come from Model(spec, config.seed).
Model pretrain_source(const Dataset& source, const BlockSpec& spec, const TrainConfig& config,
                      const RunOptions& options = {});

/// Source-free adaptation of `source` on unlabeled `target`. The head is
/// frozen for the whole run and verified byte-identical at exit.
Model adapt(Model source, const Dataset& target, const TrainConfig& config,
            const RunOptions& options = {});

struct Metrics {
  std::size_t count = 0;
  double accuracy = 0.0;
  /// NaN for classes absent from the labels.
  std::vector<double> per_class_accuracy;
  /// Mean over classes present in the labels.
  double mean_class_accuracy = 0.0;
  /// confusion[true][predicted].
  std::vector<std::vector<std::size_t>> confusion;
};

Metrics score(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
              std::size_t num_classes);

/// Eval-mode forward over `images` in [0, 1], in chunks.
backbone::ForwardTrace infer(Model& model, const Tensor& images, std::size_t chunk = 256);
std::vector<std::size_t> predict(Model& model, const Tensor& images);

/// ConfigError when the dataset is unlabeled or its class count differs.
Metrics evaluate(Model& model, const Dataset& labeled);

/// Checkpoint: spec metadata, `backbone/...` and `head/...` parameters plus
/// batch-norm running statistics.
archive::Archive to_checkpoint(Model& model);
Model from_checkpoint(const archive::Archive& ar);
void save_checkpoint(Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

/// Raw bytes of head/weight followed by head/bias.
std::vector<std::uint8_t> head_bytes(const Model& model);

}  // namespace arfnet::pipeline
