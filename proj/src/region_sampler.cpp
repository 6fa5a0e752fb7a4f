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

#include "etnd/region_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "etnd/errors.hpp"

namespace etnd {

void PerturbationConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidConfig(msg); };
  if (!(area_min > 0.0)) fail("area_min must be > 0");
  if (!(area_min <= area_max)) fail("area_min must be <= area_max");
  if (!(area_max <= 1.0)) fail("area_max must be <= 1");
  if (!(aspect_min > 0.0)) fail("aspect_min must be > 0");
  if (!(aspect_min <= aspect_max)) fail("aspect_min must be <= aspect_max");
  if (!(fixed_area > 0.0 && fixed_area <= 1.0)) {
    fail("fixed_area must lie in (0, 1]");
  }
  if (!(fixed_aspect > 0.0)) fail("fixed_aspect must be > 0");
  if (max_rejection_attempts < 1) fail("max_rejection_attempts must be >= 1");
}

namespace {

void check_inputs(const GridShape& grid, const PerturbationConfig& cfg) {
  if (!grid.valid()) {
    throw GridTooSmall("grid " + std::to_string(grid.height) + "x" +
                       std::to_string(grid.width) + " cannot hold a region");
  }
  cfg.validate();
}

struct Draw {
  double area;
  double aspect;
};

Draw draw_shape(RandomSource& rng, const PerturbationConfig& cfg) {
  if (cfg.fixed_mode) return {cfg.fixed_area, cfg.fixed_aspect};
  const double a = rng.uniform(cfg.area_min, cfg.area_max);
  const double r = rng.uniform(cfg.aspect_min, cfg.aspect_max);
  return {a, r};
}

Region place(RandomSource& rng, const GridShape& grid, int h, int w) {
  Region r;
  r.h = h;
  r.w = w;
  r.x = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.width)));
  r.y = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.height)));
  return r;
}

SampleAttempt make_attempt(const GridShape& grid, const Draw& d) {
  const double s = d.area * grid.cells();
  return {d.area, d.aspect, std::sqrt(s * d.aspect), std::sqrt(s / d.aspect),
          false};
}

}  // namespace

std::pair<int, int> region_dims(const GridShape& grid, double area,
                                double aspect) {
  const double s = area * grid.cells();
  const long h = std::lround(std::sqrt(s * aspect));
  const long w = std::lround(std::sqrt(s / aspect));
  return {static_cast<int>(std::clamp<long>(h, 1, grid.height)),
          static_cast<int>(std::clamp<long>(w, 1, grid.width))};
}

Region sample_region(RandomSource& rng, const GridShape& grid,
                     const PerturbationConfig& cfg, SampleTrace* trace) {
  check_inputs(grid, cfg);
  for (int attempt = 0; attempt < cfg.max_rejection_attempts; ++attempt) {
    const Draw d = draw_shape(rng, cfg);
    const auto [h, w] = region_dims(grid, d.area, d.aspect);
    const Region r = place(rng, grid, h, w);
    const bool ok = r.valid_for(grid);
    if (trace) {
      trace->push_back(make_attempt(grid, d));
      trace->back().accepted = ok;
    }
    if (ok) return r;
  }
  throw SamplingExhausted("no region fit after " +
                          std::to_string(cfg.max_rejection_attempts) +
                          " attempts");
}

std::pair<Region, Region> sample_transform_pair(RandomSource& rng,
                                                const GridShape& grid,
                                                const PerturbationConfig& cfg,
                                                SampleTrace* trace) {
  check_inputs(grid, cfg);
  for (int attempt = 0; attempt < cfg.max_rejection_attempts; ++attempt) {
    const Draw d = draw_shape(rng, cfg);
    const auto [h, w] = region_dims(grid, d.area, d.aspect);
    const Region src = place(rng, grid, h, w);
    const Region dst = place(rng, grid, h, w);
    const bool ok = src.valid_for(grid) && dst.valid_for(grid);
    if (trace) {
      trace->push_back(make_attempt(grid, d));
      trace->back().accepted = ok;
    }
    if (ok) return {src, dst};
  }
  throw SamplingExhausted("no transform pair fit after " +
                          std::to_string(cfg.max_rejection_attempts) +
                          " attempts");
}

RegionSet sample_batch_regions(RandomSource& rng, const GridShape& grid,
                               const PerturbationConfig& cfg) {
  RegionSet set;
  set.erase = sample_region(rng, grid, cfg);
  std::tie(set.transform_src, set.transform_dst) =
      sample_transform_pair(rng, grid, cfg);
  set.noise = sample_region(rng, grid, cfg);
  return set;
}

}  // namespace etnd
