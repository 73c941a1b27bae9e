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
#include <optional>
#include <vector>

#include "arfnet/tensor.hpp"

// Dynamic centroid evaluation: softmax-weighted class centroids smoothed
// across epochs, cosine-nearest pseudo-labels, one hard refinement round.
namespace arfnet::centroids {

/// Classes whose total weight falls below this are flagged empty.
inline constexpr double kEmptyWeight = 1e-12;

struct Centroids {
  Tensor values;                 // (K, d)
  std::vector<std::uint8_t> empty;  // 1 where the class received no weight
};

struct CentroidTable {
  Tensor centroids;                 // (K, d)
  std::vector<std::uint8_t> empty;  // per class
  std::optional<Tensor> previous;   // absent before the first update
  double lambda = 0.1;
};

struct PseudoLabels {
  std::vector<std::size_t> labels;
  std::vector<double> confidence;  // cosine similarity to the assigned centroid
};

/// c_k = sum_i softmax(P_i)_k z_i / sum_i softmax(P_i)_k.
Centroids compute_centroids(const Tensor& embeddings, const Tensor& logits);

/// table.centroids <- lambda * table.centroids + (1 - lambda) * fresh, or
/// fresh alone when the table has never been updated. The pre-update
/// centroids become `previous`.
CentroidTable ems_update(const CentroidTable& table, const Centroids& fresh);

/// argmin_k 1 - cos(z, c_k) over non-empty classes, ties to the smallest k.
PseudoLabels assign_labels(const Tensor& embeddings, const Tensor& centroids,
                           const std::vector<std::uint8_t>& empty);
PseudoLabels assign_labels(const Tensor& embeddings, const CentroidTable& table);

struct Refinement {
  PseudoLabels labels;
  Tensor centroids;                     // hard-assignment means used
  std::vector<std::uint8_t> kept_prior;  // class had no members; prior kept
};

/// One round: hard-assignment means from `labels`, then cosine reassignment.
/// A class with no members keeps its row of `prior` (or is excluded if no
/// prior is available).
Refinement refine_labels(const Tensor& embeddings, const PseudoLabels& labels,
                         std::size_t num_classes, const Tensor* prior = nullptr);

}  // namespace arfnet::centroids
