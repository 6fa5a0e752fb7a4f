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

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "etnd/attack_harness.hpp"
#include "etnd/errors.hpp"
#include "etnd/trainer.hpp"
#include "support.hpp"

using namespace etnd;
using etnd::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

const DatasetIndex& desk_data() {
  static const DatasetIndex d = synth_generate(SynthSpec{});
  return d;
}

// Desk baseline with the default desk recipe; shared by the directional checks.
ReidModel& trained_model() {
  static TrainState state = [] {
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.base_lr = 1e-2;
    cfg.lr_decay_epochs = {20, 27};
    cfg.loss_weights = {0, 0, 0};
    cfg.log_all_terms = false;
    TrainState s = make_train_state(cfg, ModelConfig{});
    train(s, desk_data(), cfg);
    return s;
  }();
  return *state.model;
}

std::vector<Image> test_images(Split split, std::size_t n) {
  std::vector<Image> out;
  for (std::size_t i : desk_data().indices(split)) {
    if (out.size() == n) break;
    out.push_back(desk_data().records[i].image);
  }
  return out;
}

}  // namespace

TEST_CASE("attack spec parsing and validation") {
  CHECK(parse_attack_kind("image_erase") == AttackKind::image_erase);
  CHECK(parse_attack_target("query") == AttackTarget::query);
  CHECK_THROWS_AS(parse_attack_kind("blur"), InvalidConfig);

  AttackSpec spec;
  spec.perturbation.area_min = 0.0;
  spec.perturbation.area_max = 0.0;
  CHECK_THROWS_AS(spec.validate(), InvalidConfig);
  ReidModel model(ModelConfig{});
  const auto images = test_images(Split::query, 2);
  CHECK_THROWS_AS(attacked_embed(model, images, spec), InvalidConfig);

  const auto j = AttackSpec{}.to_json();
  CHECK(j["kind"] == "feature_erase");
  CHECK(j["apply_to"] == "both");
}

TEST_CASE("attacked embeddings") {
  ReidModel model(ModelConfig{});
  const auto images = test_images(Split::gallery, 5);

  SUBCASE("full-grid erase gives the all-zero map embedding") {
    AttackSpec spec;
    spec.perturbation.fixed_mode = true;
    spec.perturbation.fixed_area = 1.0;
    spec.perturbation.fixed_aspect = 2.0;  // 8x4 grid
    spec.perturbation.max_rejection_attempts = 100000;  // placement succeeds 1 in 32
    const Tensor e = attacked_embed(model, images, spec);
    const Tensor zero_embed = model.classifier().embed(FeatureBatch(Tensor::Shape{5, 64, 8, 4}));
    REQUIRE(e.shape() == zero_embed.shape());
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(e.data()[i] == doctest::Approx(zero_embed.data()[i]));
  }
  SUBCASE("determinism and stream separation") {
    for (AttackKind kind : {AttackKind::feature_erase, AttackKind::feature_transform,
                            AttackKind::feature_noise, AttackKind::image_erase}) {
      AttackSpec spec;
      spec.kind = kind;
      spec.seed = 4;
      const Tensor a = attacked_embed(model, images, spec);
      CHECK(a == attacked_embed(model, images, spec));
      const Tensor chunked = attacked_embed(model, images, spec, 0, 2);
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.data()[i] - chunked.data()[i]) <= 1e-10);
      CHECK_FALSE(a == attacked_embed(model, images, spec, 1));
      CHECK_FALSE(a == model.embed(to_tensor(images)));
    }
  }
}

TEST_CASE("attacks on a trained desk model" * doctest::timeout(600)) {
  ReidModel& model = trained_model();
  EvalOptions opts;
  const RankingResult clean = evaluate_model(model, desk_data(), opts);
  CHECK(clean.rank1() > 0.1);

  AttackSpec big;
  big.perturbation.area_min = 0.4;
  big.perturbation.area_max = 0.4;
  int erase_hurts = 0, both_worse = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    big.seed = seed;
    big.apply_to = AttackTarget::both;
    const RankingResult both = attack_eval(model, desk_data(), big, opts);
    big.apply_to = AttackTarget::query;
    const RankingResult query = attack_eval(model, desk_data(), big, opts);
    erase_hurts += both.map <= clean.map;
    both_worse += both.map <= query.map;
  }
  CHECK(erase_hurts >= 8);
  CHECK(both_worse >= 8);

  // reproducible
  big.seed = 3;
  CHECK(attack_eval(model, desk_data(), big, opts).map == attack_eval(model, desk_data(), big, opts).map);

  // near-identity attack: one cell on the 8x4 grid, query side only
  AttackSpec tiny;
  tiny.perturbation.fixed_mode = true;
  tiny.perturbation.fixed_area = 1.0 / 32.0;
  tiny.perturbation.fixed_aspect = 1.0;
  tiny.apply_to = AttackTarget::query;
  const RankingResult near = attack_eval(model, desk_data(), tiny, opts);
  CHECK(std::abs(near.map - clean.map) <= 0.05);
}

TEST_CASE("heatmaps") {
  SUBCASE("constant map is 0.5 everywhere") {
    const FeatureBatch constant(Tensor::Shape{1, 3, 4, 2}, 7.0);
    for (HeatmapStat stat : {HeatmapStat::mean, HeatmapStat::max}) {
      const Tensor a = activation_map(constant, stat);
      CHECK(a.shape() == Tensor::Shape{1, 1, 4, 2});
      for (Real v : a.span()) CHECK(v == 0.5);
    }
  }
  SUBCASE("values lie in [0, 1] and span it") {
    Rng rng(3);
    const Tensor a = activation_map(random_tensor({1, 5, 6, 3}, rng, 0.0, 4.0), HeatmapStat::max);
    const auto [lo, hi] = std::minmax_element(a.span().begin(), a.span().end());
    CHECK(*lo == 0.0);
    CHECK(*hi == 1.0);
  }
  SUBCASE("export round-trips at the input size") {
    ReidModel model(ModelConfig{});
    const fs::path dir = fs::temp_directory_path() / "etnd_test_heatmap";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const Image img = desk_data().records[0].image;
    export_heatmap(model, img, dir / "a.png");
    const Image back = read_image(dir / "a.png");
    CHECK(back.height == img.height);
    CHECK(back.width == img.width);

    const Image big = resize_bilinear(img, 100, 50);
    export_heatmap(model, big, dir / "b.png");
    CHECK(read_image(dir / "b.png").height == 100);

    CHECK(heatmap_overlay(img, Tensor(Tensor::Shape{1, 1, 8, 4}, 0.5), 0.0) == img);
    CHECK_THROWS_AS(export_heatmap(model, img, dir / "missing" / "c.png"), IoFailure);
  }
}
