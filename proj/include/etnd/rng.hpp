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

#include <cstdint>
#include <random>
#include <string>

namespace etnd {

/// Source of uniform draws consumed by the samplers. Production code passes
/// an Rng; tests may substitute a scripted source to force specific draws.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  /// Uniform real in [0, 1) with 53 bits of resolution.
  virtual double uniform() = 0;
  /// Uniform integer in [0, n). n must be positive.
  virtual std::uint64_t below(std::uint64_t n) = 0;

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

/// Seedable, splittable generator. All conversions from raw 64-bit words are
/// done here rather than through <random> distributions, whose output is
/// implementation-defined, so a seed reproduces the same stream everywhere.
class Rng final : public RandomSource {
 public:
  explicit Rng(std::uint64_t seed = 0);

  double uniform() override;
  using RandomSource::uniform;
  std::uint64_t below(std::uint64_t n) override;
  std::uint64_t next_u64() { return engine_(); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal draw (Box-Muller, no caching).
  double normal();

  /// Independent child stream keyed by `stream`; does not advance this one.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.seed_ == b.seed_ && a.engine_ == b.engine_;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace etnd
