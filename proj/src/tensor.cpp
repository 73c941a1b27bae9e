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

#include "arfnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "arfnet/errors.hpp"

namespace arfnet {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw ConfigError("tensor: payload of " + std::to_string(data_.size()) +
                      " values does not fit shape " + shape_str(shape_));
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw ConfigError("tensor: cannot reshape " + shape_str(shape_) + " to " +
                      shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw ConfigError("tensor: += shape mismatch " + shape_str(shape_) +
                      " vs " + shape_str(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  out += b;
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ConfigError("tensor: - shape mismatch " + shape_str(a.shape()) +
                      " vs " + shape_str(b.shape()));
  }
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor operator*(const Tensor& a, double s) {
  Tensor out = a;
  out *= s;
  return out;
}

Tensor slice_batch(const Tensor& t, std::size_t begin, std::size_t end) {
  if (t.rank() == 0 || end > t.dim(0) || begin > end) {
    throw ConfigError("tensor: bad batch slice");
  }
  Shape shape = t.shape();
  const std::size_t stride = t.size() / shape[0];
  shape[0] = end - begin;
  std::vector<double> data(t.storage().begin() + begin * stride,
                           t.storage().begin() + end * stride);
  return Tensor(std::move(shape), std::move(data));
}

Tensor gather_batch(const Tensor& t, std::span<const std::size_t> indices) {
  Shape shape = t.shape();
  const std::size_t stride = t.size() / shape[0];
  Tensor out([&] {
    Shape s = shape;
    s[0] = indices.size();
    return s;
  }());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= shape[0]) throw ConfigError("tensor: gather index out of range");
    std::copy_n(t.ptr() + indices[i] * stride, stride, out.ptr() + i * stride);
  }
  return out;
}

Tensor concat_batch(std::span<const Tensor> parts) {
  if (parts.empty()) throw ConfigError("tensor: concat of nothing");
  Shape shape = parts[0].shape();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != shape.size() ||
        !std::equal(p.shape().begin() + 1, p.shape().end(), shape.begin() + 1)) {
      throw ConfigError("tensor: concat trailing shape mismatch");
    }
    total += p.dim(0);
  }
  shape[0] = total;
  std::vector<double> data;
  data.reserve(shape_numel(shape));
  for (const auto& p : parts) data.insert(data.end(), p.storage().begin(), p.storage().end());
  return Tensor(std::move(shape), std::move(data));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace arfnet
