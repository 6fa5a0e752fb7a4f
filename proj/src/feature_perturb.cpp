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

#include "etnd/feature_perturb.hpp"

#include <numeric>
#include <string>

#include "etnd/errors.hpp"

namespace etnd {

TransformMode parse_transform_mode(std::string_view s) {
  if (s == "copy") return TransformMode::copy;
  if (s == "swap") return TransformMode::swap;
  throw InvalidConfig("transform_mode must be one of {copy, swap}, got '" +
                      std::string(s) + "'");
}

std::string_view to_string(TransformMode m) {
  return m == TransformMode::copy ? "copy" : "swap";
}

namespace {

void require_region(const FeatureBatch& maps, const Region& r,
                    const char* what) {
  if (!r.valid_for(grid_of(maps))) {
    throw ShapeMismatch(std::string(what) + " region (" + std::to_string(r.x) +
                        ", " + std::to_string(r.y) + ", " +
                        std::to_string(r.w) + ", " + std::to_string(r.h) +
                        ") exceeds grid " + std::to_string(maps.h()) + "x" +
                        std::to_string(maps.w()));
  }
}

void require_pair(const FeatureBatch& maps, const Region& src,
                  const Region& dst) {
  require_region(maps, src, "transform source");
  require_region(maps, dst, "transform destination");
  if (!src.same_size(dst)) {
    throw ShapeMismatch("transform regions differ in size");
  }
}

void fill_region(FeatureBatch& maps, const Region& r, Real v) {
  for (int b = 0; b < maps.n(); ++b)
    for (int c = 0; c < maps.c(); ++c)
      for (int y = r.y; y < r.y + r.h; ++y)
        for (int x = r.x; x < r.x + r.w; ++x) maps(b, c, y, x) = v;
}

}  // namespace

FeatureBatch erase(const FeatureBatch& maps, const Region& region) {
  require_region(maps, region, "erase");
  FeatureBatch out = maps;
  fill_region(out, region, 0.0);
  return out;
}

std::vector<int> transform_source_index(const GridShape& grid, const Region& src,
                                        const Region& dst, TransformMode mode) {
  std::vector<int> index(static_cast<std::size_t>(grid.cells()));
  std::iota(index.begin(), index.end(), 0);
  for (int dy = 0; dy < src.h; ++dy) {
    for (int dx = 0; dx < src.w; ++dx) {
      const int from = (src.y + dy) * grid.width + (src.x + dx);
      const int to = (dst.y + dy) * grid.width + (dst.x + dx);
      index[static_cast<std::size_t>(to)] = from;
    }
  }
  if (mode == TransformMode::swap) {
    for (int dy = 0; dy < src.h; ++dy) {
      for (int dx = 0; dx < src.w; ++dx) {
        const int from = (dst.y + dy) * grid.width + (dst.x + dx);
        const int to = (src.y + dy) * grid.width + (src.x + dx);
        index[static_cast<std::size_t>(to)] = from;
      }
    }
  }
  return index;
}

FeatureBatch transform(const FeatureBatch& maps, const Region& src,
                       const Region& dst, TransformMode mode) {
  require_pair(maps, src, dst);
  const auto index = transform_source_index(grid_of(maps), src, dst, mode);
  FeatureBatch out = maps;
  const int cells = maps.h() * maps.w();
  for (int b = 0; b < maps.n(); ++b) {
    for (int c = 0; c < maps.c(); ++c) {
      const Real* in = maps.data() + maps.offset(b, c, 0, 0);
      Real* o = out.data() + out.offset(b, c, 0, 0);
      for (int i = 0; i < cells; ++i) o[i] = in[index[static_cast<std::size_t>(i)]];
    }
  }
  return out;
}

FeatureBatch transform_backward(const FeatureBatch& grad_out, const Region& src,
                                const Region& dst, TransformMode mode) {
  require_pair(grad_out, src, dst);
  const auto index = transform_source_index(grid_of(grad_out), src, dst, mode);
  FeatureBatch grad_in(grad_out.shape());
  const int cells = grad_out.h() * grad_out.w();
  for (int b = 0; b < grad_out.n(); ++b) {
    for (int c = 0; c < grad_out.c(); ++c) {
      const Real* g = grad_out.data() + grad_out.offset(b, c, 0, 0);
      Real* gi = grad_in.data() + grad_in.offset(b, c, 0, 0);
      for (int i = 0; i < cells; ++i) gi[index[static_cast<std::size_t>(i)]] += g[i];
    }
  }
  return grad_in;
}

FeatureBatch noise(const FeatureBatch& maps, const Region& region,
                   RandomSource& rng) {
  require_region(maps, region, "noise");
  FeatureBatch out = maps;
  for (int b = 0; b < out.n(); ++b)
    for (int c = 0; c < out.c(); ++c)
      for (int y = region.y; y < region.y + region.h; ++y)
        for (int x = region.x; x < region.x + region.w; ++x)
          out(b, c, y, x) = rng.uniform();
  return out;
}

AdversarialBatch make_adversarial_batch(const FeatureBatch& clean,
                                        const RegionSet& regions,
                                        RandomSource& rng, TransformMode mode) {
  AdversarialBatch adv;
  adv.clean = clean;
  adv.erased = erase(clean, regions.erase);
  adv.transformed =
      transform(clean, regions.transform_src, regions.transform_dst, mode);
  adv.noised = noise(clean, regions.noise, rng);
  adv.regions = regions;
  return adv;
}

}  // namespace etnd
