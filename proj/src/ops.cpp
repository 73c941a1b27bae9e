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

#include "arfnet/ops.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "arfnet/errors.hpp"

namespace arfnet::ops {
namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

struct ConvGeom {
  std::size_t batch, channels, height, width;  // image side
  std::size_t kernel, stride, pad;
  std::size_t out_h, out_w;                    // patch-grid side
  std::size_t rows() const { return channels * kernel * kernel; }
  std::size_t cols() const { return batch * out_h * out_w; }
};

// col[(c*k + ki)*k + kj, b*oh*ow + y*ow + x] = img[b, c, y*s - p + ki, x*s - p + kj]
void im2col(const double* img, const ConvGeom& g, double* col) {
  const std::size_t ncols = g.cols();
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        double* row = col + ((c * g.kernel + ki) * g.kernel + kj) * ncols;
        for (std::size_t b = 0; b < g.batch; ++b) {
          const double* src = img + (b * g.channels + c) * g.height * g.width;
          double* dst = row + b * plane;
          for (std::size_t y = 0; y < g.out_h; ++y) {
            const long iy = static_cast<long>(y * g.stride + ki) - static_cast<long>(g.pad);
            for (std::size_t x = 0; x < g.out_w; ++x) {
              const long ix = static_cast<long>(x * g.stride + kj) - static_cast<long>(g.pad);
              dst[y * g.out_w + x] =
                  (iy >= 0 && ix >= 0 && iy < static_cast<long>(g.height) &&
                   ix < static_cast<long>(g.width))
                      ? src[iy * g.width + ix]
                      : 0.0;
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates into img.
void col2im(const double* col, const ConvGeom& g, double* img) {
  const std::size_t ncols = g.cols();
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        const double* row = col + ((c * g.kernel + ki) * g.kernel + kj) * ncols;
        for (std::size_t b = 0; b < g.batch; ++b) {
          double* dst = img + (b * g.channels + c) * g.height * g.width;
          const double* src = row + b * plane;
          for (std::size_t y = 0; y < g.out_h; ++y) {
            const long iy = static_cast<long>(y * g.stride + ki) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
            for (std::size_t x = 0; x < g.out_w; ++x) {
              const long ix = static_cast<long>(x * g.stride + kj) - static_cast<long>(g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
              dst[iy * g.width + ix] += src[y * g.out_w + x];
            }
          }
        }
      }
    }
  }
}

// (B, C, P) <-> (C, B*P) channel-major matrix layout.
void to_channel_major(const double* src, std::size_t batch, std::size_t channels,
                      std::size_t plane, double* dst) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c)
      std::copy_n(src + (b * channels + c) * plane, plane,
                  dst + c * batch * plane + b * plane);
}

void from_channel_major(const double* src, std::size_t batch, std::size_t channels,
                        std::size_t plane, double* dst) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c)
      std::copy_n(src + c * batch * plane + b * plane, plane,
                  dst + (b * channels + c) * plane);
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ConfigError(std::string(op) + ": expected rank " + std::to_string(rank) +
                      ", got shape " + shape_str(t.shape()));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ConfigError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                      " vs " + shape_str(b.shape()));
  }
}

}  // namespace

Var conv2d(Graph& g, Var x, Var w, Var b, int stride, int pad) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(w);
  require_rank(xv, 4, "conv2d");
  require_rank(wv, 4, "conv2d");
  if (wv.dim(1) != xv.dim(1) || wv.dim(2) != wv.dim(3) || g.value(b).size() != wv.dim(0)) {
    throw ConfigError("conv2d: weight " + shape_str(wv.shape()) +
                      " incompatible with input " + shape_str(xv.shape()));
  }
  const std::size_t k = wv.dim(2);
  const long oh = (static_cast<long>(xv.dim(2)) + 2 * pad - static_cast<long>(k)) / stride + 1;
  const long ow = (static_cast<long>(xv.dim(3)) + 2 * pad - static_cast<long>(k)) / stride + 1;
  if (oh <= 0 || ow <= 0) throw ConfigError("conv2d: input extent too small for kernel");
  ConvGeom geom{xv.dim(0), xv.dim(1), xv.dim(2), xv.dim(3), k,
                static_cast<std::size_t>(stride), static_cast<std::size_t>(pad),
                static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)};
  const std::size_t cout = wv.dim(0);
  auto col = std::make_shared<std::vector<double>>(geom.rows() * geom.cols());
  im2col(xv.ptr(), geom, col->data());

  MatRM y = CMapRM(wv.ptr(), cout, geom.rows()) *
            CMapRM(col->data(), geom.rows(), geom.cols());
  const std::size_t plane = geom.out_h * geom.out_w;
  Tensor out({geom.batch, cout, geom.out_h, geom.out_w});
  from_channel_major(y.data(), geom.batch, cout, plane, out.ptr());
  const Tensor& bv = g.value(b);
  for (std::size_t n = 0; n < geom.batch; ++n)
    for (std::size_t c = 0; c < cout; ++c) {
      double* p = out.ptr() + (n * cout + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += bv[c];
    }

  return g.emit(std::move(out), {x, w, b}, [=](Graph& g, Var self) {
    const Tensor& dy = g.grad(self);
    MatRM dym(cout, geom.cols());
    to_channel_major(dy.ptr(), geom.batch, cout, plane, dym.data());
    CMapRM colm(col->data(), geom.rows(), geom.cols());
    if (g.requires_grad(w)) {
      MapRM(g.grad(w).ptr(), cout, geom.rows()).noalias() += dym * colm.transpose();
    }
    if (g.requires_grad(b)) {
      Tensor& db = g.grad(b);
      for (std::size_t c = 0; c < cout; ++c) db[c] += dym.row(c).sum();
    }
    if (g.requires_grad(x)) {
      MatRM dcol = CMapRM(g.value(w).ptr(), cout, geom.rows()).transpose() * dym;
      col2im(dcol.data(), geom, g.grad(x).ptr());
    }
  });
}

Var conv_transpose2d(Graph& g, Var x, Var w, Var b, int stride, int pad) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(w);
  require_rank(xv, 4, "conv_transpose2d");
  require_rank(wv, 4, "conv_transpose2d");
  if (wv.dim(0) != xv.dim(1) || wv.dim(2) != wv.dim(3) || g.value(b).size() != wv.dim(1)) {
    throw ConfigError("conv_transpose2d: weight " + shape_str(wv.shape()) +
                      " incompatible with input " + shape_str(xv.shape()));
  }
  const std::size_t k = wv.dim(2);
  const std::size_t cin = wv.dim(0), cout = wv.dim(1);
  const long oh = (static_cast<long>(xv.dim(2)) - 1) * stride - 2 * pad + static_cast<long>(k);
  const long ow = (static_cast<long>(xv.dim(3)) - 1) * stride - 2 * pad + static_cast<long>(k);
  if (oh <= 0 || ow <= 0) throw ConfigError("conv_transpose2d: degenerate output extent");
  // The output image plays the role of a convolution input whose patch grid
  // is the (H, W) of x.
  ConvGeom geom{xv.dim(0), cout, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow),
                k, static_cast<std::size_t>(stride), static_cast<std::size_t>(pad),
                xv.dim(2), xv.dim(3)};
  const std::size_t plane_in = xv.dim(2) * xv.dim(3);
  auto xm = std::make_shared<MatRM>(cin, geom.cols());
  to_channel_major(xv.ptr(), geom.batch, cin, plane_in, xm->data());
  MatRM col = CMapRM(wv.ptr(), cin, geom.rows()).transpose() * (*xm);
  Tensor out({geom.batch, cout, geom.height, geom.width});
  col2im(col.data(), geom, out.ptr());
  const Tensor& bv = g.value(b);
  const std::size_t plane_out = geom.height * geom.width;
  for (std::size_t n = 0; n < geom.batch; ++n)
    for (std::size_t c = 0; c < cout; ++c) {
      double* p = out.ptr() + (n * cout + c) * plane_out;
      for (std::size_t i = 0; i < plane_out; ++i) p[i] += bv[c];
    }

  return g.emit(std::move(out), {x, w, b}, [=](Graph& g, Var self) {
    const Tensor& dy = g.grad(self);
    MatRM dcol(geom.rows(), geom.cols());
    im2col(dy.ptr(), geom, dcol.data());
    if (g.requires_grad(w)) {
      MapRM(g.grad(w).ptr(), cin, geom.rows()).noalias() += (*xm) * dcol.transpose();
    }
    if (g.requires_grad(b)) {
      Tensor& db = g.grad(b);
      for (std::size_t n = 0; n < geom.batch; ++n)
        for (std::size_t c = 0; c < cout; ++c) {
          const double* p = dy.ptr() + (n * cout + c) * plane_out;
          double s = 0.0;
          for (std::size_t i = 0; i < plane_out; ++i) s += p[i];
          db[c] += s;
        }
    }
    if (g.requires_grad(x)) {
      MatRM dx = CMapRM(g.value(w).ptr(), cin, geom.rows()) * dcol;
      Tensor& gx = g.grad(x);
      Tensor tmp(gx.shape());
      from_channel_major(dx.data(), geom.batch, cin, plane_in, tmp.ptr());
      gx += tmp;
    }
  });
}

Var batch_norm(Graph& g, Var x, Var gamma, Var beta, BnState& state, BnMode mode) {
  const Tensor& xv = g.value(x);
  require_rank(xv, 4, "batch_norm");
  const std::size_t nb = xv.dim(0), nc = xv.dim(1), plane = xv.dim(2) * xv.dim(3);
  if (g.value(gamma).size() != nc || g.value(beta).size() != nc ||
      state.running_mean.size() != nc || state.running_var.size() != nc) {
    throw ConfigError("batch_norm: parameter width does not match " +
                      std::to_string(nc) + " channels");
  }
  const double count = static_cast<double>(nb * plane);
  const Tensor& gv = g.value(gamma);
  const Tensor& bv = g.value(beta);

  auto xhat = std::make_shared<Tensor>(xv.shape());
  auto inv_std = std::make_shared<std::vector<double>>(nc);
  const bool batch_stats = mode != BnMode::kEval;
  if (batch_stats && count < 2.0) {
    throw ConfigError("batch_norm: batch statistics need more than one value per channel");
  }
  for (std::size_t c = 0; c < nc; ++c) {
    double mean, var;
    if (batch_stats) {
      mean = 0.0;
      for (std::size_t n = 0; n < nb; ++n) {
        const double* p = xv.ptr() + (n * nc + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) mean += p[i];
      }
      mean /= count;
      var = 0.0;
      for (std::size_t n = 0; n < nb; ++n) {
        const double* p = xv.ptr() + (n * nc + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) var += (p[i] - mean) * (p[i] - mean);
      }
      var /= count;
      if (mode == BnMode::kTrain) {
        state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mean;
        state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] +
                               state.momentum * var * count / (count - 1.0);
      }
    } else {
      mean = state.running_mean[c];
      var = state.running_var[c];
    }
    const double is = 1.0 / std::sqrt(var + state.eps);
    (*inv_std)[c] = is;
    for (std::size_t n = 0; n < nb; ++n) {
      const double* p = xv.ptr() + (n * nc + c) * plane;
      double* q = xhat->ptr() + (n * nc + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) q[i] = (p[i] - mean) * is;
    }
  }
  Tensor out(xv.shape());
  for (std::size_t n = 0; n < nb; ++n)
    for (std::size_t c = 0; c < nc; ++c) {
      const double* q = xhat->ptr() + (n * nc + c) * plane;
      double* o = out.ptr() + (n * nc + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) o[i] = gv[c] * q[i] + bv[c];
    }

  return g.emit(std::move(out), {x, gamma, beta}, [=](Graph& g, Var self) {
    const Tensor& dy = g.grad(self);
    const Tensor& gv = g.value(gamma);
    for (std::size_t c = 0; c < nc; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t n = 0; n < nb; ++n) {
        const double* d = dy.ptr() + (n * nc + c) * plane;
        const double* q = xhat->ptr() + (n * nc + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          sum_dy += d[i];
          sum_dy_xhat += d[i] * q[i];
        }
      }
      if (g.requires_grad(gamma)) g.grad(gamma)[c] += sum_dy_xhat;
      if (g.requires_grad(beta)) g.grad(beta)[c] += sum_dy;
      if (!g.requires_grad(x)) continue;
      Tensor& dx = g.grad(x);
      const double scale = gv[c] * (*inv_std)[c];
      for (std::size_t n = 0; n < nb; ++n) {
        const double* d = dy.ptr() + (n * nc + c) * plane;
        const double* q = xhat->ptr() + (n * nc + c) * plane;
        double* o = dx.ptr() + (n * nc + c) * plane;
        if (batch_stats) {
          for (std::size_t i = 0; i < plane; ++i)
            o[i] += scale * (d[i] - sum_dy / count - q[i] * sum_dy_xhat / count);
        } else {
          for (std::size_t i = 0; i < plane; ++i) o[i] += scale * d[i];
        }
      }
    }
  });
}

Var relu(Graph& g, Var x) {
  Tensor out = g.value(x);
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return g.emit(std::move(out), {x}, [x](Graph& g, Var self) {
    const Tensor& dy = g.grad(self);
    const Tensor& xv = g.value(x);
    Tensor& dx = g.grad(x);
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (xv[i] > 0.0) dx[i] += dy[i];
  });
}

Var sigmoid(Graph& g, Var x) {
  Tensor out = g.value(x);
  for (auto& v : out.data()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return g.emit(std::move(out), {x}, [x](Graph& g, Var self) {
    const Tensor& dy = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& dx = g.grad(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
  });
}

PoolResult max_pool2(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  require_rank(xv, 4, "max_pool2");
  const std::size_t h = xv.dim(2), w = xv.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ConfigError("max_pool2: extent " + shape_str(xv.shape()) +
                      " is not restorable by unpooling (H and W must be even)");
  }
  const std::size_t planes = xv.dim(0) * xv.dim(1);
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor out({xv.dim(0), xv.dim(1), oh, ow});
  auto idx = std::make_shared<std::vector<std::size_t>>(planes * oh * ow);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = xv.ptr() + p * h * w;
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x0 = 0; x0 < ow; ++x0) {
        std::size_t best = (2 * y) * w + 2 * x0;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t at = (2 * y + dy) * w + 2 * x0 + dx;
            if (src[at] > src[best]) best = at;
          }
        out[p * oh * ow + y * ow + x0] = src[best];
        (*idx)[p * oh * ow + y * ow + x0] = best;
      }
  }
  Var v = g.emit(std::move(out), {x}, [x, idx, h, w, oh, ow, planes](Graph& g, Var self) {
    const Tensor& dy = g.grad(self);
    Tensor& dx = g.grad(x);
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t i = 0; i < oh * ow; ++i)
        dx[p * h * w + (*idx)[p * oh * ow + i]] += dy[p * oh * ow + i];
  });
  return PoolResult{v, idx};
}

Var max_unpool2(Graph& g, Var x, const PoolResult& pool, std::size_t height,
                std::size_t width) {
  const Tensor& xv = g.value(x);
  require_rank(xv, 4, "max_unpool2");
  const Tensor& pv = g.value(pool.out);
  if (xv.shape() != pv.shape() || pv.dim(2) * 2 != height || pv.dim(3) * 2 != width) {
    throw ConfigError("max_unpool2: input " + shape_str(xv.shape()) +
                      " does not match pooled " + shape_str(pv.shape()));
  }
  const std::size_t planes = xv.dim(0) * xv.dim(1);
  const std::size_t small = xv.dim(2) * xv.dim(3);
  auto idx = pool.indices;
  Tensor out({xv.dim(0), xv.dim(1), height, width});
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < small; ++i)
      out[p * height * width + (*idx)[p * small + i]] = xv[p * small + i];
  const std::size_t big = height * width;
  return g.emit(std::move(out), {x}, [x, idx, planes, small, big](Graph& g, Var self) {
    const Tensor& dy = g.grad(self);
    Tensor& dx = g.grad(x);
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t i = 0; i < small; ++i)
        dx[p * small + i] += dy[p * big + (*idx)[p * small + i]];
  });
}

Var global_avg_pool(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  require_rank(xv, 4, "global_avg_pool");
  const std::size_t nb = xv.dim(0), nc = xv.dim(1), plane = xv.dim(2) * xv.dim(3);
  Tensor out({nb, nc});
  for (std::size_t i = 0; i < nb * nc; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < plane; ++j) s += xv[i * plane + j];
    out[i] = s / static_cast<double>(plane);
  }
  return g.emit(std::move(out), {x}, [x, plane](Graph& g, Var self) {
    const Tensor& dy = g.grad(self);
    Tensor& dx = g.grad(x);
    const double inv = 1.0 / static_cast<double>(plane);
    for (std::size_t i = 0; i < dy.size(); ++i)
      for (std::size_t j = 0; j < plane; ++j) dx[i * plane + j] += dy[i] * inv;
  });
}

Var linear(Graph& g, Var x, Var w, Var b) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(w);
  require_rank(xv, 2, "linear");
  require_rank(wv, 2, "linear");
  if (wv.dim(1) != xv.dim(1) || g.value(b).size() != wv.dim(0)) {
    throw ConfigError("linear: weight " + shape_str(wv.shape()) +
                      " incompatible with input " + shape_str(xv.shape()));
  }
  const std::size_t nb = xv.dim(0), nin = xv.dim(1), nout = wv.dim(0);
  Tensor out({nb, nout});
  MapRM om(out.ptr(), nb, nout);
  om.noalias() = CMapRM(xv.ptr(), nb, nin) * CMapRM(wv.ptr(), nout, nin).transpose();
  const Tensor& bv = g.value(b);
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = 0; j < nout; ++j) out[i * nout + j] += bv[j];
  return g.emit(std::move(out), {x, w, b}, [=](Graph& g, Var self) {
    const Tensor& dy = g.grad(self);
    CMapRM dym(dy.ptr(), nb, nout);
    if (g.requires_grad(w)) {
      MapRM(g.grad(w).ptr(), nout, nin).noalias() +=
          dym.transpose() * CMapRM(g.value(x).ptr(), nb, nin);
    }
    if (g.requires_grad(b)) {
      Tensor& db = g.grad(b);
      for (std::size_t i = 0; i < nb; ++i)
        for (std::size_t j = 0; j < nout; ++j) db[j] += dy[i * nout + j];
    }
    if (g.requires_grad(x)) {
      MapRM(g.grad(x).ptr(), nb, nin).noalias() += dym * CMapRM(g.value(w).ptr(), nout, nin);
    }
  });
}

Var add(Graph& g, Var a, Var b) {
  require_same(g.value(a), g.value(b), "add");
  Tensor out = g.value(a) + g.value(b);
  return g.emit(std::move(out), {a, b}, [a, b](Graph& g, Var self) {
    const Tensor& dy = g.grad(self);
    if (g.requires_grad(a)) g.grad(a) += dy;
    if (g.requires_grad(b)) g.grad(b) += dy;
  });
}

Var scale(Graph& g, Var a, double s) {
  Tensor out = g.value(a) * s;
  return g.emit(std::move(out), {a}, [a, s](Graph& g, Var self) {
    const Tensor& dy = g.grad(self);
    Tensor& da = g.grad(a);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += s * dy[i];
  });
}

Var mul(Graph& g, Var a, Var b) {
  require_same(g.value(a), g.value(b), "mul");
  Tensor out = g.value(a);
  const Tensor& bv = g.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return g.emit(std::move(out), {a, b}, [a, b](Graph& g, Var self) {
    const Tensor& dy = g.grad(self);
    if (g.requires_grad(a)) {
      Tensor& da = g.grad(a);
      const Tensor& bv = g.value(b);
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += dy[i] * bv[i];
    }
    if (g.requires_grad(b)) {
      Tensor& db = g.grad(b);
      const Tensor& av = g.value(a);
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += dy[i] * av[i];
    }
  });
}

Var channel_scale(Graph& g, Var x, Var gate) {
  const Tensor& xv = g.value(x);
  const Tensor& gv = g.value(gate);
  require_rank(xv, 4, "channel_scale");
  if (gv.rank() != 2 || gv.dim(0) != xv.dim(0) || gv.dim(1) != xv.dim(1)) {
    throw ConfigError("channel_scale: gate " + shape_str(gv.shape()) +
                      " does not match feature map " + shape_str(xv.shape()));
  }
  const std::size_t plane = xv.dim(2) * xv.dim(3);
  Tensor out = xv;
  for (std::size_t i = 0; i < gv.size(); ++i)
    for (std::size_t j = 0; j < plane; ++j) out[i * plane + j] *= gv[i];
  return g.emit(std::move(out), {x, gate}, [x, gate, plane](Graph& g, Var self) {
    const Tensor& dy = g.grad(self);
    const Tensor& gv = g.value(gate);
    if (g.requires_grad(x)) {
      Tensor& dx = g.grad(x);
      for (std::size_t i = 0; i < gv.size(); ++i)
        for (std::size_t j = 0; j < plane; ++j) dx[i * plane + j] += dy[i * plane + j] * gv[i];
    }
    if (g.requires_grad(gate)) {
      const Tensor& xv = g.value(x);
      Tensor& dg = g.grad(gate);
      for (std::size_t i = 0; i < gv.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < plane; ++j) s += dy[i * plane + j] * xv[i * plane + j];
        dg[i] += s;
      }
    }
  });
}

Var spatial_softmax(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  require_rank(xv, 4, "spatial_softmax");
  const std::size_t planes = xv.dim(0) * xv.dim(1), plane = xv.dim(2) * xv.dim(3);
  Tensor out(xv.shape());
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = xv.ptr() + p * plane;
    double* dst = out.ptr() + p * plane;
    const double m = *std::max_element(src, src + plane);
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += dst[i] = std::exp(src[i] - m);
    for (std::size_t i = 0; i < plane; ++i) dst[i] /= s;
  }
  return g.emit(std::move(out), {x}, [x, planes, plane](Graph& g, Var self) {
    const Tensor& dy = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& dx = g.grad(x);
    for (std::size_t p = 0; p < planes; ++p) {
      double dot = 0.0;
      for (std::size_t i = 0; i < plane; ++i) dot += dy[p * plane + i] * y[p * plane + i];
      for (std::size_t i = 0; i < plane; ++i)
        dx[p * plane + i] += y[p * plane + i] * (dy[p * plane + i] - dot);
    }
  });
}

Var l2_normalize_rows(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  require_rank(xv, 2, "l2_normalize_rows");
  const std::size_t nb = xv.dim(0), n = xv.dim(1);
  auto norms = std::make_shared<std::vector<double>>(nb);
  Tensor out = xv;
  for (std::size_t i = 0; i < nb; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += xv[i * n + j] * xv[i * n + j];
    (*norms)[i] = std::sqrt(s);
    if ((*norms)[i] > 0.0)
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= (*norms)[i];
  }
  return g.emit(std::move(out), {x}, [x, norms, nb, n](Graph& g, Var self) {
    const Tensor& dy = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& dx = g.grad(x);
    for (std::size_t i = 0; i < nb; ++i) {
      const double nrm = (*norms)[i];
      if (nrm == 0.0) {
        for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += dy[i * n + j];
        continue;
      }
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += dy[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        dx[i * n + j] += (dy[i * n + j] - y[i * n + j] * dot) / nrm;
    }
  });
}

Var sum(Graph& g, Var x) {
  double s = 0.0;
  for (double v : g.value(x).data()) s += v;
  return g.emit(Tensor({1}, s), {x}, [x](Graph& g, Var self) {
    const double d = g.grad(self)[0];
    Tensor& dx = g.grad(x);
    for (auto& v : dx.data()) v += d;
  });
}

}  // namespace arfnet::ops
