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
#include <filesystem>
#include <json.hpp>
#include <span>
#include <string_view>
#include <vector>

#include "etnd/data_pipeline.hpp"
#include "etnd/image.hpp"
#include "etnd/region_sampler.hpp"
#include "etnd/reid_model.hpp"
#include "etnd/retrieval_eval.hpp"

namespace etnd {

enum class AttackKind { feature_erase, feature_transform, feature_noise, image_erase };
enum class AttackTarget { query, gallery, both };

AttackKind parse_attack_kind(std::string_view s);
std::string_view to_string(AttackKind k);
AttackTarget parse_attack_target(std::string_view s);
std::string_view to_string(AttackTarget t);

struct AttackSpec {
  AttackKind kind = AttackKind::feature_erase;
  PerturbationConfig perturbation;
  std::uint64_t seed = 0;
  AttackTarget apply_to = AttackTarget::both;

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

/// Embeddings of `images` through the attacked path. Every image gets its
/// own region, drawn from Rng(spec.seed).split(stream).split(i); `stream`
/// keeps query and gallery draws apart. Image-level erasing zeroes a
/// rectangle of the normalized network input.
Tensor attacked_embed(ReidModel& model, std::span<const Image> images, const AttackSpec& spec,
                      std::uint64_t stream = 0, int chunk = 64);

/// Clean query/gallery embeddings of the dataset's test splits.
EvalSet embed_eval_set(ReidModel& model, const DatasetIndex& data);
RankingResult evaluate_model(ReidModel& model, const DatasetIndex& data, const EvalOptions& opts);

/// Retrieval evaluation with the attacked side(s) re-embedded.
RankingResult attack_eval(ReidModel& model, const DatasetIndex& data, const AttackSpec& spec,
                          const EvalOptions& opts);

enum class HeatmapStat { mean, max };
HeatmapStat parse_heatmap_stat(std::string_view s);

/// Channel statistic of one (1, C, H, W) map, min-max scaled to [0, 1] as an
/// (1, 1, H, W) tensor. A constant map becomes all 0.5.
Tensor activation_map(const FeatureBatch& map, HeatmapStat stat = HeatmapStat::mean);

/// Upsamples `activation` to the image size, applies a jet colormap and
/// blends it over the image with weight `alpha`.
Image heatmap_overlay(const Image& image, const Tensor& activation, double alpha = 0.5);

/// Extracts the image at the model's input size and writes the overlay at
/// the original image size as PNG. Throws IoFailure.
void export_heatmap(ReidModel& model, const Image& image, const std::filesystem::path& path,
                    HeatmapStat stat = HeatmapStat::mean, double alpha = 0.5);

}  // namespace etnd
