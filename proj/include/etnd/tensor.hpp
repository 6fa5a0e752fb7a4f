// Copyright 2026 The ETND Authors
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
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace etnd {

using Real = double;

/// Dense 4-D tensor in NCHW order. Matrices are stored as (rows, cols, 1, 1).
///
/// A batch of feature maps is a Tensor of shape (B, C, H, W); `at_hwc`
/// addresses it in the (h, w, c) order used when talking about a single map.
class Tensor {
 public:
  using Shape = std::array<int, 4>;

  Tensor() : shape_{0, 0, 0, 0} {}
  explicit Tensor(Shape shape, Real fill = 0.0);
  Tensor(int n, int c, int h = 1, int w = 1, Real fill = 0.0)
      : Tensor(Shape{n, c, h, w}, fill) {}

  const Shape& shape() const { return shape_; }
  int n() const { return shape_[0]; }
  int c() const { return shape_[1]; }
  int h() const { return shape_[2]; }
  int w() const { return shape_[3]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  /// Elements per batch item.
  std::size_t item_size() const {
    return static_cast<std::size_t>(shape_[1]) * shape_[2] * shape_[3];
  }

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }
  std::span<Real> span() { return data_; }
  std::span<const Real> span() const { return data_; }
  std::vector<Real>& values() { return data_; }
  const std::vector<Real>& values() const { return data_; }

  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) *
               shape_[3] +
           w;
  }
  Real& operator()(int n, int c, int h = 0, int w = 0) {
    return data_[offset(n, c, h, w)];
  }
  Real operator()(int n, int c, int h = 0, int w = 0) const {
    return data_[offset(n, c, h, w)];
  }
  Real& at_hwc(int b, int h, int w, int c) { return (*this)(b, c, h, w); }
  Real at_hwc(int b, int h, int w, int c) const { return (*this)(b, c, h, w); }

  void fill(Real v);
  void zero() { fill(0.0); }
  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(Real s);

  Real sum() const;
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  /// Copy of items [first, first + count) along the batch axis.
  Tensor slice(int first, int count) const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<Real> data_;
};

std::string shape_string(const Tensor::Shape& s);

}  // namespace etnd
