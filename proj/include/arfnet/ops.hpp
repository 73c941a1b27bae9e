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

#include <memory>
#include <vector>

#include "arfnet/autograd.hpp"

// Differentiable primitives recorded on a Graph. Shapes follow (B, C, H, W)
// for feature maps and (B, N) for vectors.
namespace arfnet::ops {

/// x (B,Cin,H,W), w (Cout,Cin,k,k), b (Cout).
Var conv2d(Graph& g, Var x, Var w, Var b, int stride, int pad);

/// Transposed convolution; w (Cin,Cout,k,k), b (Cout).
/// Output extent is (H-1)*stride - 2*pad + k.
Var conv_transpose2d(Graph& g, Var x, Var w, Var b, int stride, int pad);

enum class BnMode {
  kTrain,        // batch statistics, running statistics updated
  kTrainFrozen,  // batch statistics, running statistics untouched
  kEval,         // running statistics
};

struct BnState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

Var batch_norm(Graph& g, Var x, Var gamma, Var beta, BnState& state,
               BnMode mode);

Var relu(Graph& g, Var x);
Var sigmoid(Graph& g, Var x);

struct PoolResult {
  Var out;
  /// Flat input offset (within each (b,c) plane) of every pooled maximum.
  std::shared_ptr<const std::vector<std::size_t>> indices;
};

/// 2x2 max pooling with stride 2; H and W must be even.
PoolResult max_pool2(Graph& g, Var x);

/// Inverse of max_pool2: scatters values back to the recorded argmax slots
/// of an (H, W) plane, zero elsewhere.
Var max_unpool2(Graph& g, Var x, const PoolResult& pool, std::size_t height,
                std::size_t width);

/// (B,C,H,W) -> (B,C).
Var global_avg_pool(Graph& g, Var x);

/// x (B,in), w (out,in), b (out).
Var linear(Graph& g, Var x, Var w, Var b);

Var add(Graph& g, Var a, Var b);
Var scale(Graph& g, Var a, double s);
Var mul(Graph& g, Var a, Var b);

/// out[b,c,h,w] = x[b,c,h,w] * gate[b,c].
Var channel_scale(Graph& g, Var x, Var gate);

/// Softmax over the flattened (H*W) plane of each (b, c).
Var spatial_softmax(Graph& g, Var x);

/// Row-wise L2 normalization of (B, N). All-zero rows pass through.
Var l2_normalize_rows(Graph& g, Var x);

/// Scalar sum of all entries, shape (1).
Var sum(Graph& g, Var x);

}  // namespace arfnet::ops
