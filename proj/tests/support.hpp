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

#include <deque>
#include <stdexcept>

#include "etnd/rng.hpp"
#include "etnd/tensor.hpp"

namespace etnd::testing {

/// Replays fixed uniform and integer draws, then falls back to a seeded Rng.
class ScriptedSource : public RandomSource {
 public:
  std::deque<double> uniforms;
  std::deque<std::uint64_t> integers;

  double uniform() override {
    if (uniforms.empty()) return fallback_.uniform();
    const double u = uniforms.front();
    uniforms.pop_front();
    return u;
  }
  using RandomSource::uniform;
  std::uint64_t below(std::uint64_t n) override {
    if (integers.empty()) return fallback_.below(n);
    const std::uint64_t v = integers.front();
    integers.pop_front();
    if (v >= n) throw std::logic_error("scripted integer out of range");
    return v;
  }

 private:
  Rng fallback_{12345};
};

/// The unit draw that makes uniform(lo, hi) return `value`.
inline double unit_for(double value, double lo, double hi) {
  return hi == lo ? 0.0 : (value - lo) / (hi - lo);
}

inline Tensor random_tensor(Tensor::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (Real& v : t.span()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace etnd::testing
