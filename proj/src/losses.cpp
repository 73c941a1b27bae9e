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

#include "arfnet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "arfnet/errors.hpp"

namespace arfnet::losses {
namespace {

void require_logits(const Tensor& logits, const char* op) {
  if (logits.rank() != 2 || logits.dim(0) == 0 || logits.dim(1) == 0) {
    throw ConfigError(std::string(op) + ": logits must be (B, K), got " +
                      shape_str(logits.shape()));
  }
}

// 0 * log 0 = 0.
double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

void LossWeights::validate() const {
  ARFNET_CHECK_CONFIG(alpha >= 0.0 && std::isfinite(alpha), "losses: alpha must be >= 0");
  ARFNET_CHECK_CONFIG(beta >= 0.0 && std::isfinite(beta), "losses: beta must be >= 0");
}

Tensor log_softmax_rows(const Tensor& logits) {
  require_logits(logits, "log_softmax_rows");
  const std::size_t nb = logits.dim(0), k = logits.dim(1);
  Tensor out(logits.shape());
  for (std::size_t i = 0; i < nb; ++i) {
    auto row = logits.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - m);
    const double lse = m + std::log(s);
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = row[j] - lse;
  }
  return out;
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor out = log_softmax_rows(logits);
  for (auto& v : out.data()) v = std::exp(v);
  return out;
}

ScalarGrad source_ce(const Tensor& logits, std::span<const std::size_t> labels) {
  require_logits(logits, "source_ce");
  const std::size_t nb = logits.dim(0), k = logits.dim(1);
  if (labels.size() != nb) throw ConfigError("source_ce: label count does not match batch");
  Tensor logp = log_softmax_rows(logits);
  ScalarGrad out{0.0, Tensor(logits.shape())};
  const double inv_b = 1.0 / static_cast<double>(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    if (labels[i] >= k) {
      throw ConfigError("source_ce: label " + std::to_string(labels[i]) +
                        " outside [0, " + std::to_string(k) + ")");
    }
    out.value -= logp[i * k + labels[i]] * inv_b;
    for (std::size_t j = 0; j < k; ++j) {
      out.grad[i * k + j] = (std::exp(logp[i * k + j]) - (j == labels[i] ? 1.0 : 0.0)) * inv_b;
    }
  }
  return out;
}

SsdResult ssd_loss(const Tensor& logits, std::span<const Tensor> layer_logits,
                   std::span<const std::size_t> pseudo_labels) {
  require_logits(logits, "ssd_loss");
  const std::size_t nb = logits.dim(0), k = logits.dim(1);
  for (const Tensor& l : layer_logits) {
    if (l.shape() != logits.shape()) {
      throw ConfigError("ssd_loss: layer logits " + shape_str(l.shape()) +
                        " do not match output logits " + shape_str(logits.shape()));
    }
  }
  const double inv_b = 1.0 / static_cast<double>(nb);
  const double inv_k = 1.0 / static_cast<double>(k);

  // The ce term is standard cross-entropy scaled by 1/K.
  ScalarGrad ce = source_ce(logits, pseudo_labels);
  SsdResult out;
  out.ce = ce.value * inv_k;
  out.grad_logits = ce.grad * inv_k;
  out.grad_logits_teacher = Tensor(logits.shape());

  Tensor log_r = log_softmax_rows(logits);
  for (const Tensor& layer : layer_logits) {
    Tensor log_q = log_softmax_rows(layer);
    Tensor grad(layer.shape());
    for (std::size_t i = 0; i < nb; ++i) {
      double kl = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double q = std::exp(log_q[i * k + j]);
        if (q > 0.0) kl += q * (log_q[i * k + j] - log_r[i * k + j]);
      }
      out.kd += kl * inv_b;
      for (std::size_t j = 0; j < k; ++j) {
        const double q = std::exp(log_q[i * k + j]);
        const double r = std::exp(log_r[i * k + j]);
        const double diff = q > 0.0 ? log_q[i * k + j] - log_r[i * k + j] : 0.0;
        grad[i * k + j] = q * (diff - kl) * inv_b;
        out.grad_logits_teacher[i * k + j] += (r - q) * inv_b;
      }
    }
    out.grad_layer_logits.push_back(std::move(grad));
  }
  return out;
}

ScalarGrad im_loss(const Tensor& logits) {
  require_logits(logits, "im_loss");
  const std::size_t nb = logits.dim(0), k = logits.dim(1);
  const double inv_b = 1.0 / static_cast<double>(nb);
  Tensor q = softmax_rows(logits);
  Tensor logq = log_softmax_rows(logits);

  std::vector<double> mean(k, 0.0);
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = 0; j < k; ++j) mean[j] += q[i * k + j] * inv_b;

  ScalarGrad out{0.0, Tensor(logits.shape())};
  for (std::size_t i = 0; i < nb; ++i) {
    double h = 0.0;
    for (std::size_t j = 0; j < k; ++j) h -= xlogx(q[i * k + j]);
    out.value += h * inv_b;
    // d H_i / d a_ij = -q_ij (log q_ij + H_i)
    for (std::size_t j = 0; j < k; ++j) {
      const double qij = q[i * k + j];
      if (qij > 0.0) out.grad[i * k + j] -= qij * (logq[i * k + j] + h) * inv_b;
    }
  }
  std::vector<double> log_mean(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    out.value += xlogx(mean[j]);
    log_mean[j] = mean[j] > 0.0 ? std::log(mean[j]) : 0.0;
  }
  // d/d a_ij of sum_k pbar_k log pbar_k = (1/B) q_ij (log pbar_j - sum_k q_ik log pbar_k)
  for (std::size_t i = 0; i < nb; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < k; ++j) dot += q[i * k + j] * log_mean[j];
    for (std::size_t j = 0; j < k; ++j) {
      out.grad[i * k + j] += q[i * k + j] * (log_mean[j] - dot) * inv_b;
    }
  }
  return out;
}

double total_loss(const LossReport& t, const LossWeights& w) {
  w.validate();
  const std::pair<const char*, double> terms[] = {
      {"im", t.im}, {"ce", t.ce}, {"kd", t.kd}, {"gac", t.gac}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) throw NumericError(std::string("losses: term '") + name + "' is not finite");
  }
  return t.im + w.alpha * (t.ce + t.kd) + w.beta * t.gac;
}

LossReport make_report(double im, double ce, double kd, double gac, const LossWeights& w) {
  LossReport r{im, ce, kd, gac, 0.0};
  r.total = total_loss(r, w);
  return r;
}

}  // namespace arfnet::losses
