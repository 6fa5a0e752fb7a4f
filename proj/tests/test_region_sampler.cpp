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

#include <doctest.h>

#include <set>
#include <tuple>

#include "etnd/errors.hpp"
#include "etnd/region_sampler.hpp"
#include "support.hpp"

using namespace etnd;
using etnd::testing::ScriptedSource;
using etnd::testing::unit_for;

namespace {

const PerturbationConfig kDefault{};

// Scripts one (area, aspect) draw under the default bounds.
void force_shape(ScriptedSource& src, double area, double aspect) {
  src.uniforms.push_back(unit_for(area, kDefault.area_min, kDefault.area_max));
  src.uniforms.push_back(unit_for(aspect, kDefault.aspect_min, kDefault.aspect_max));
}

}  // namespace

TEST_CASE("region_dims follows the nearest-integer rule") {
  const GridShape g{16, 8};
  CHECK(region_dims(g, 0.02, 1.0) == std::pair{2, 2});
  CHECK(region_dims(g, 0.4, 1.0) == std::pair{7, 7});
  CHECK(region_dims(g, 0.125, 1.0) == std::pair{4, 4});
  // clamped to the grid
  CHECK(region_dims(g, 1.0, 10.0) == std::pair{16, 4});
  CHECK(region_dims(GridShape{1, 1}, 0.02, 1.0) == std::pair{1, 1});
  // half away from zero: sqrt(s * r) = 2.5 -> 3
  CHECK(region_dims(GridShape{10, 10}, 0.0625, 1.0) == std::pair{3, 3});
}

TEST_CASE("forced draws give the expected region sizes") {
  const GridShape g{16, 8};
  SUBCASE("alpha 0.02, r 1 -> 2x2") {
    ScriptedSource src;
    force_shape(src, 0.02, 1.0);
    src.integers = {3, 5};
    const Region r = sample_region(src, g, kDefault);
    CHECK(r == Region{3, 5, 2, 2});
  }
  SUBCASE("alpha 0.4, r 1 -> 7x7") {
    ScriptedSource src;
    force_shape(src, 0.4, 1.0);
    src.integers = {1, 9};
    const Region r = sample_region(src, g, kDefault);
    CHECK(r == Region{1, 9, 7, 7});
  }
  SUBCASE("rejected placement redraws shape and point") {
    ScriptedSource src;
    force_shape(src, 0.4, 1.0);
    src.integers = {5, 0};  // x + 7 > 8: rejected
    force_shape(src, 0.02, 1.0);
    src.integers.insert(src.integers.end(), {6, 14});
    SampleTrace trace;
    const Region r = sample_region(src, g, kDefault, &trace);
    CHECK(r == Region{6, 14, 2, 2});
    REQUIRE(trace.size() == 2);
    CHECK_FALSE(trace[0].accepted);
    CHECK(trace[1].accepted);
    CHECK(trace[0].target_h == doctest::Approx(std::sqrt(51.2)));
  }
}

TEST_CASE("1x1 grid admits only the full region") {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    CHECK(sample_region(rng, GridShape{1, 1}, kDefault) == Region{0, 0, 1, 1});
  }
}

TEST_CASE("transform pair shares one shape") {
  const GridShape g{16, 8};
  SUBCASE("alpha 0.125, r 1 -> two 4x4 regions") {
    ScriptedSource src;
    force_shape(src, 0.125, 1.0);
    src.integers = {0, 0, 4, 12};
    const auto [a, b] = sample_transform_pair(src, g, kDefault);
    CHECK(a == Region{0, 0, 4, 4});
    CHECK(b == Region{4, 12, 4, 4});
  }
  SUBCASE("identical placement draws give identical regions") {
    ScriptedSource src;
    force_shape(src, 0.125, 1.0);
    src.integers = {2, 3, 2, 3};
    const auto [a, b] = sample_transform_pair(src, g, kDefault);
    CHECK(a == b);
  }
  SUBCASE("2x2 grid with minimal size") {
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
      const auto [a, b] = sample_transform_pair(rng, GridShape{2, 2}, kDefault);
      CHECK(a.same_size(b));
      CHECK(a.valid_for(GridShape{2, 2}));
      CHECK(b.valid_for(GridShape{2, 2}));
    }
  }
}

TEST_CASE("sampler invariants over many draws") {
  const GridShape g{16, 8};
  Rng rng(2024);
  SampleTrace trace;
  for (int i = 0; i < 10000; ++i) {
    const RegionSet s = sample_batch_regions(rng, g, kDefault);
    REQUIRE(s.valid_for(g));
    for (const Region& r : {s.erase, s.transform_src, s.noise}) {
      const double frac = r.area() / 128.0;
      CHECK(frac >= 0.02 * 0.7);
      CHECK(frac <= 0.4 * 1.3);
    }
    CHECK(s.transform_src.same_size(s.transform_dst));
    trace.clear();
    sample_region(rng, g, kDefault, &trace);
    for (const SampleAttempt& a : trace) {
      CHECK(a.area >= kDefault.area_min);
      CHECK(a.area <= kDefault.area_max);
      CHECK(a.aspect >= kDefault.aspect_min);
      CHECK(a.aspect <= kDefault.aspect_max);
    }
  }
}

TEST_CASE("fixed mode targets fixed_area * H * W") {
  PerturbationConfig cfg;
  cfg.fixed_mode = true;
  const GridShape g{16, 8};
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    SampleTrace trace;
    sample_region(rng, g, cfg, &trace);
    for (const SampleAttempt& a : trace) {
      CHECK(a.target_h * a.target_w == doctest::Approx(0.3 * 128));
      CHECK(a.aspect == 0.3);
    }
  }
}

TEST_CASE("determinism and seed sensitivity") {
  const GridShape g{16, 8};
  Rng a(77), b(77);
  CHECK(sample_batch_regions(a, g, kDefault) == sample_batch_regions(b, g, kDefault));

  std::set<std::tuple<int, int, int, int, int, int, int, int, int, int, int, int, int, int, int, int>>
      distinct;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const RegionSet s = sample_batch_regions(rng, g, kDefault);
    distinct.insert({s.erase.x, s.erase.y, s.erase.w, s.erase.h, s.transform_src.x,
                     s.transform_src.y, s.transform_src.w, s.transform_src.h, s.transform_dst.x,
                     s.transform_dst.y, s.transform_dst.w, s.transform_dst.h, s.noise.x, s.noise.y,
                     s.noise.w, s.noise.h});
  }
  CHECK(distinct.size() >= 99);
}

TEST_CASE("errors") {
  PerturbationConfig bad;
  bad.area_min = 0.0;
  Rng rng(1);
  CHECK_THROWS_AS(sample_region(rng, GridShape{16, 8}, bad), InvalidConfig);
  bad = {};
  bad.area_min = 0.5;
  bad.area_max = 0.4;
  CHECK_THROWS_AS(bad.validate(), InvalidConfig);
  CHECK_THROWS_AS(sample_region(rng, GridShape{0, 8}, kDefault), GridTooSmall);

  PerturbationConfig one;
  one.max_rejection_attempts = 1;
  ScriptedSource src;
  force_shape(src, 0.4, 1.0);
  src.integers = {7, 15};
  CHECK_THROWS_AS(sample_region(src, GridShape{16, 8}, one), SamplingExhausted);
}
