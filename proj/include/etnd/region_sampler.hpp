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

#include <utility>
#include <vector>

#include "etnd/rng.hpp"

namespace etnd {

struct GridShape {
  int height = 16;
  int width = 8;

  int cells() const { return height * width; }
  bool valid() const { return height >= 1 && width >= 1; }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Axis-aligned rectangle of grid cells: columns [x, x + w), rows [y, y + h).
struct Region {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  int area() const { return w * h; }
  bool contains(int row, int col) const {
    return row >= y && row < y + h && col >= x && col < x + w;
  }
  bool valid_for(const GridShape& grid) const {
    return x >= 0 && y >= 0 && w >= 1 && h >= 1 && x + w <= grid.width &&
           y + h <= grid.height;
  }
  bool same_size(const Region& o) const { return w == o.w && h == o.h; }
  friend bool operator==(const Region&, const Region&) = default;
};

/// Bounds on the area proportion and aspect ratio (height / width) of a
/// sampled rectangle. In fixed mode every draw uses fixed_area/fixed_aspect.
struct PerturbationConfig {
  double area_min = 0.02;
  double area_max = 0.4;
  double aspect_min = 0.3;
  double aspect_max = 1.0 / 0.3;
  bool fixed_mode = false;
  double fixed_area = 0.3;
  double fixed_aspect = 0.3;
  int max_rejection_attempts = 100;

  /// Throws InvalidConfig naming the offending field.
  void validate() const;
  friend bool operator==(const PerturbationConfig&,
                         const PerturbationConfig&) = default;
};

struct RegionSet {
  Region erase;
  Region transform_src;
  Region transform_dst;
  Region noise;

  bool valid_for(const GridShape& grid) const {
    return erase.valid_for(grid) && transform_src.valid_for(grid) &&
           transform_dst.valid_for(grid) && noise.valid_for(grid) &&
           transform_src.same_size(transform_dst);
  }
  friend bool operator==(const RegionSet&, const RegionSet&) = default;
};

/// One attempt of the rejection loop, recorded when a trace is supplied.
struct SampleAttempt {
  double area = 0.0;
  double aspect = 0.0;
  double target_h = 0.0;
  double target_w = 0.0;
  bool accepted = false;
};
using SampleTrace = std::vector<SampleAttempt>;

/// Integer (h, w) for a continuous target: round half away from zero, then
/// clamp to [1, grid dimension].
std::pair<int, int> region_dims(const GridShape& grid, double area,
                                double aspect);

Region sample_region(RandomSource& rng, const GridShape& grid,
                     const PerturbationConfig& cfg,
                     SampleTrace* trace = nullptr);

/// Two equally sized regions from a single (area, aspect) draw. They may
/// overlap or coincide.
std::pair<Region, Region> sample_transform_pair(RandomSource& rng,
                                                const GridShape& grid,
                                                const PerturbationConfig& cfg,
                                                SampleTrace* trace = nullptr);

/// Erase region, transform pair, noise region, in that draw order.
RegionSet sample_batch_regions(RandomSource& rng, const GridShape& grid,
                               const PerturbationConfig& cfg);

}  // namespace etnd
