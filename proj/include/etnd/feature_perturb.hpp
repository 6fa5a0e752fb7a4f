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

#include <string_view>
#include <vector>

#include "etnd/region_sampler.hpp"
#include "etnd/rng.hpp"
#include "etnd/tensor.hpp"

namespace etnd {

/// A batch of feature maps, shape (B, C, H, W).
using FeatureBatch = Tensor;

enum class TransformMode { copy, swap };

TransformMode parse_transform_mode(std::string_view s);
std::string_view to_string(TransformMode m);

inline GridShape grid_of(const FeatureBatch& maps) { return {maps.h(), maps.w()}; }

/// Zero every channel of every map inside `region`.
FeatureBatch erase(const FeatureBatch& maps, const Region& region);

/// Write the content of `src` into `dst`, reading from a snapshot of the
/// input. In swap mode `src` also receives the old `dst` content; where the
/// two overlap the swap write (into src) wins.
FeatureBatch transform(const FeatureBatch& maps, const Region& src,
                       const Region& dst, TransformMode mode = TransformMode::copy);

/// Replace every entry inside `region` with an independent Uniform[0, 1) draw.
FeatureBatch noise(const FeatureBatch& maps, const Region& region,
                   RandomSource& rng);

/// For each output cell (row-major, H*W), the input cell it reads from.
std::vector<int> transform_source_index(const GridShape& grid, const Region& src,
                                        const Region& dst, TransformMode mode);

/// Adjoint of `transform`: scatters output gradients back onto input cells.
FeatureBatch transform_backward(const FeatureBatch& grad_out, const Region& src,
                                const Region& dst,
                                TransformMode mode = TransformMode::copy);

/// Adjoint of `erase` and of `noise` (the replaced entries carry no gradient).
inline FeatureBatch mask_backward(const FeatureBatch& grad_out,
                                  const Region& region) {
  return erase(grad_out, region);
}

struct AdversarialBatch {
  FeatureBatch clean;
  FeatureBatch erased;
  FeatureBatch transformed;
  FeatureBatch noised;
  RegionSet regions;
};

AdversarialBatch make_adversarial_batch(const FeatureBatch& clean,
                                        const RegionSet& regions,
                                        RandomSource& rng,
                                        TransformMode mode = TransformMode::copy);

}  // namespace etnd
