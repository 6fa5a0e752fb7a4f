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

#include "etnd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "etnd/errors.hpp"

namespace etnd {

Tensor::Tensor(Shape shape, Real fill) : shape_(shape) {
  for (int d : shape_) {
    if (d < 0) throw ShapeMismatch("negative tensor dimension");
  }
  data_.assign(static_cast<std::size_t>(shape_[0]) * shape_[1] * shape_[2] *
                   shape_[3],
               fill);
}

void Tensor::fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!same_shape(other)) {
    throw ShapeMismatch("tensor add: " + shape_string(shape_) + " vs " +
                        shape_string(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(Real s) {
  for (Real& v : data_) v *= s;
  return *this;
}

Real Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](Real v) { return std::isfinite(v); });
}

Tensor Tensor::slice(int first, int count) const {
  if (first < 0 || count < 0 || first + count > shape_[0]) {
    throw ShapeMismatch("tensor slice out of range");
  }
  Tensor out(Shape{count, shape_[1], shape_[2], shape_[3]});
  const std::size_t per = item_size();
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(first * per),
              count * per, out.data_.begin());
  return out;
}

std::string shape_string(const Tensor::Shape& s) {
  return "(" + std::to_string(s[0]) + ", " + std::to_string(s[1]) + ", " +
         std::to_string(s[2]) + ", " + std::to_string(s[3]) + ")";
}

}  // namespace etnd
