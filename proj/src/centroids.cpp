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

#include "arfnet/centroids.hpp"

#include <cmath>

#include "arfnet/errors.hpp"
#include "arfnet/losses.hpp"

namespace arfnet::centroids {
namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

Centroids compute_centroids(const Tensor& embeddings, const Tensor& logits) {
  if (embeddings.rank() != 2 || logits.rank() != 2 || embeddings.dim(0) == 0 ||
      embeddings.dim(0) != logits.dim(0)) {
    throw ConfigError("centroids: embeddings (n, d) and logits (n, K) must share n >= 1");
  }
  if (!embeddings.all_finite() || !logits.all_finite()) {
    throw NumericError("centroids: non-finite embeddings or logits");
  }
  const std::size_t n = embeddings.dim(0), d = embeddings.dim(1), k = logits.dim(1);
  Tensor prob = losses::softmax_rows(logits);
  Centroids out{Tensor({k, d}), std::vector<std::uint8_t>(k, 0)};
  std::vector<double> weight(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) {
      const double p = prob[i * k + c];
      weight[c] += p;
      for (std::size_t j = 0; j < d; ++j) out.values[c * d + j] += p * embeddings[i * d + j];
    }
  for (std::size_t c = 0; c < k; ++c) {
    if (weight[c] < kEmptyWeight) {
      out.empty[c] = 1;
      for (std::size_t j = 0; j < d; ++j) out.values[c * d + j] = 0.0;
      continue;
    }
    for (std::size_t j = 0; j < d; ++j) out.values[c * d + j] /= weight[c];
  }
  return out;
}

CentroidTable ems_update(const CentroidTable& table, const Centroids& fresh) {
  if (!(table.lambda >= 0.0 && table.lambda <= 1.0)) {
    throw ConfigError("centroids: lambda must lie in [0, 1]");
  }
  CentroidTable out;
  out.lambda = table.lambda;
  if (table.centroids.empty()) {
    out.centroids = fresh.values;
    out.empty = fresh.empty;
    return out;
  }
  if (table.centroids.shape() != fresh.values.shape()) {
    throw ConfigError("centroids: EMS shape mismatch " + shape_str(table.centroids.shape()) +
                      " vs " + shape_str(fresh.values.shape()));
  }
  const double lam = table.lambda;
  out.previous = table.centroids;
  out.centroids = Tensor(fresh.values.shape());
  out.empty.assign(fresh.empty.size(), 0);
  const std::size_t k = fresh.values.dim(0), d = fresh.values.dim(1);
  for (std::size_t c = 0; c < k; ++c) {
    const bool old_empty = !table.empty.empty() && table.empty[c];
    const bool new_empty = fresh.empty[c] != 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double a = table.centroids[c * d + j], b = fresh.values[c * d + j];
      // An empty side contributes nothing; the other side passes through.
      double v = lam * a + (1.0 - lam) * b;
      if (old_empty && !new_empty) v = b;
      if (new_empty && !old_empty) v = a;
      out.centroids[c * d + j] = v;
    }
    out.empty[c] = old_empty && new_empty;
  }
  return out;
}

PseudoLabels assign_labels(const Tensor& embeddings, const Tensor& centroids,
                           const std::vector<std::uint8_t>& empty) {
  if (embeddings.rank() != 2 || centroids.rank() != 2 || embeddings.dim(1) != centroids.dim(1)) {
    throw ConfigError("centroids: embedding width does not match centroid width");
  }
  const std::size_t n = embeddings.dim(0), k = centroids.dim(0);
  std::vector<double> cnorm(k);
  bool any = false;
  for (std::size_t c = 0; c < k; ++c) {
    cnorm[c] = norm(centroids.row(c));
    const bool usable = (empty.empty() || !empty[c]) && cnorm[c] > 0.0;
    any = any || usable;
    if (!usable) cnorm[c] = -1.0;
  }
  if (!any) throw ConfigError("centroids: every centroid is empty");

  PseudoLabels out{std::vector<std::size_t>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    auto z = embeddings.row(i);
    const double zn = norm(z);
    double best_dist = INFINITY, best_cos = 0.0;
    std::size_t best = 0;
    for (std::size_t c = 0; c < k; ++c) {
      if (cnorm[c] < 0.0) continue;
      double dot = 0.0;
      auto cr = centroids.row(c);
      for (std::size_t j = 0; j < z.size(); ++j) dot += z[j] * cr[j];
      const double cos = zn > 0.0 ? dot / (zn * cnorm[c]) : 0.0;
      const double dist = 1.0 - cos;
      if (dist < best_dist) {
        best_dist = dist;
        best_cos = cos;
        best = c;
      }
    }
    out.labels[i] = best;
    out.confidence[i] = best_cos;
  }
  return out;
}

PseudoLabels assign_labels(const Tensor& embeddings, const CentroidTable& table) {
  return assign_labels(embeddings, table.centroids, table.empty);
}

Refinement refine_labels(const Tensor& embeddings, const PseudoLabels& labels,
                         std::size_t num_classes, const Tensor* prior) {
  if (embeddings.rank() != 2 || labels.labels.size() != embeddings.dim(0)) {
    throw ConfigError("centroids: label count does not match embeddings");
  }
  const std::size_t n = embeddings.dim(0), d = embeddings.dim(1);
  Refinement out;
  out.centroids = Tensor({num_classes, d});
  out.kept_prior.assign(num_classes, 0);
  std::vector<std::size_t> count(num_classes, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = labels.labels[i];
    if (y >= num_classes) throw ConfigError("centroids: label outside [0, K)");
    ++count[y];
    for (std::size_t j = 0; j < d; ++j) out.centroids[y * d + j] += embeddings[i * d + j];
  }
  std::vector<std::uint8_t> empty(num_classes, 0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (count[c] == 0) {
      if (prior != nullptr && prior->rank() == 2 && prior->dim(0) == num_classes &&
          prior->dim(1) == d) {
        for (std::size_t j = 0; j < d; ++j) out.centroids[c * d + j] = (*prior)[c * d + j];
        out.kept_prior[c] = 1;
      } else {
        empty[c] = 1;
      }
      continue;
    }
    for (std::size_t j = 0; j < d; ++j) out.centroids[c * d + j] /= static_cast<double>(count[c]);
  }
  out.labels = assign_labels(embeddings, out.centroids, empty);
  return out;
}

}  // namespace arfnet::centroids
