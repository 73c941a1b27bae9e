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

#include <span>
#include <vector>

#include "arfnet/tensor.hpp"

// Scalar training objectives over (B, K) logits. Every loss returns its value
// together with the analytic gradient with respect to its inputs.
namespace arfnet::losses {

struct LossWeights {
  double alpha = 1.0;  // self-distillation weight
  double beta = 0.5;   // global-local contrast weight

  void validate() const;
};

/// One optimization step's terms; total = im + alpha * (ce + kd) + beta * gac.
struct LossReport {
  double im = 0.0;
  double ce = 0.0;
  double kd = 0.0;
  double gac = 0.0;
  double total = 0.0;
};

struct ScalarGrad {
  double value = 0.0;
  Tensor grad;
};

Tensor softmax_rows(const Tensor& logits);
Tensor log_softmax_rows(const Tensor& logits);

/// Mean cross-entropy of softmax(logits) against integer labels.
ScalarGrad source_ce(const Tensor& logits, std::span<const std::size_t> labels);

struct SsdResult {
  double ce = 0.0;
  double kd = 0.0;
  /// d ce / d logits.
  Tensor grad_logits;
  /// d kd / d logits (the output distribution acting as teacher).
  Tensor grad_logits_teacher;
  /// d kd / d layer_logits[l].
  std::vector<Tensor> grad_layer_logits;
};

/// ce = batch mean of -(1/K) log softmax(logits)[label];
/// kd = batch mean of sum_l KL(softmax(layer_logits[l]) || softmax(logits)).
SsdResult ssd_loss(const Tensor& logits, std::span<const Tensor> layer_logits,
                   std::span<const std::size_t> pseudo_labels);

/// Mean per-sample prediction entropy plus the negative entropy of the
/// batch-mean prediction. Lies in [-log K, log K].
ScalarGrad im_loss(const Tensor& logits);

/// im + alpha * (ce + kd) + beta * gac. NumericError names any non-finite term.
double total_loss(const LossReport& terms, const LossWeights& weights);

/// Fills `total` from the other terms.
LossReport make_report(double im, double ce, double kd, double gac,
                       const LossWeights& weights);

}  // namespace arfnet::losses
