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

#include "etnd/attack_harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "etnd/errors.hpp"
#include "etnd/feature_perturb.hpp"

namespace etnd {

AttackKind parse_attack_kind(std::string_view s) {
  if (s == "feature_erase") return AttackKind::feature_erase;
  if (s == "feature_transform") return AttackKind::feature_transform;
  if (s == "feature_noise") return AttackKind::feature_noise;
  if (s == "image_erase") return AttackKind::image_erase;
  throw InvalidConfig("attack kind must be one of {feature_erase, feature_transform, "
                      "feature_noise, image_erase}, got '" + std::string(s) + "'");
}

std::string_view to_string(AttackKind k) {
  switch (k) {
    case AttackKind::feature_erase: return "feature_erase";
    case AttackKind::feature_transform: return "feature_transform";
    case AttackKind::feature_noise: return "feature_noise";
    case AttackKind::image_erase: return "image_erase";
  }
  return "?";
}

AttackTarget parse_attack_target(std::string_view s) {
  if (s == "query") return AttackTarget::query;
  if (s == "gallery") return AttackTarget::gallery;
  if (s == "both") return AttackTarget::both;
  throw InvalidConfig("apply_to must be one of {query, gallery, both}, got '" + std::string(s) +
                      "'");
}

std::string_view to_string(AttackTarget t) {
  switch (t) {
    case AttackTarget::query: return "query";
    case AttackTarget::gallery: return "gallery";
    case AttackTarget::both: return "both";
  }
  return "?";
}

void AttackSpec::validate() const { perturbation.validate(); }

nlohmann::ordered_json AttackSpec::to_json() const {
  const auto& p = perturbation;
  return {{"kind", std::string(to_string(kind))},
          {"apply_to", std::string(to_string(apply_to))},
          {"seed", seed},
          {"perturbation",
           {{"area_min", p.area_min},
            {"area_max", p.area_max},
            {"aspect_min", p.aspect_min},
            {"aspect_max", p.aspect_max},
            {"fixed_mode", p.fixed_mode},
            {"fixed_area", p.fixed_area},
            {"fixed_aspect", p.fixed_aspect},
            {"max_rejection_attempts", p.max_rejection_attempts}}}};
}

namespace {

void put_item(Tensor& dst, int index, const Tensor& item) {
  std::copy_n(item.data(), item.size(), dst.data() + dst.offset(index, 0, 0, 0));
}

Tensor perturb_item(const Tensor& item, AttackKind kind, const PerturbationConfig& cfg,
                    Rng& rng) {
  const GridShape grid = grid_of(item);
  switch (kind) {
    case AttackKind::feature_erase:
    case AttackKind::image_erase:
      return erase(item, sample_region(rng, grid, cfg));
    case AttackKind::feature_transform: {
      const auto [src, dst] = sample_transform_pair(rng, grid, cfg);
      return transform(item, src, dst);
    }
    case AttackKind::feature_noise: {
      const Region r = sample_region(rng, grid, cfg);
      return noise(item, r, rng);
    }
  }
  return item;
}

std::vector<Image> model_inputs(const ReidModel& model, std::span<const Image> images) {
  const ModelConfig& cfg = model.config();
  std::vector<Image> out;
  out.reserve(images.size());
  for (const Image& img : images) {
    out.push_back(img.height == cfg.image_h && img.width == cfg.image_w
                      ? img
                      : resize_bilinear(img, cfg.image_h, cfg.image_w));
  }
  return out;
}

std::vector<Image> split_images(const DatasetIndex& data, Split s) {
  std::vector<Image> out;
  for (std::size_t i : data.indices(s)) out.push_back(data.records[i].image);
  return out;
}

void split_labels(const DatasetIndex& data, Split s, std::vector<int>& ids,
                  std::vector<int>& cams) {
  ids.clear();
  cams.clear();
  const bool with_cams = data.has_cameras(s);
  for (std::size_t i : data.indices(s)) {
    ids.push_back(data.records[i].identity);
    if (with_cams) cams.push_back(data.records[i].camera);
  }
}

Tensor clean_embed(ReidModel& model, std::span<const Image> images) {
  const std::vector<Image> inputs = model_inputs(model, images);
  return model.embed(to_tensor(inputs));
}

}  // namespace

Tensor attacked_embed(ReidModel& model, std::span<const Image> images, const AttackSpec& spec,
                      std::uint64_t stream, int chunk) {
  spec.validate();
  const std::vector<Image> inputs = model_inputs(model, images);
  const Rng base = Rng(spec.seed).split(stream);
  const int n = static_cast<int>(inputs.size());
  Tensor out(n, model.classifier().channels());
  for (int first = 0; first < n; first += chunk) {
    const int count = std::min(chunk, n - first);
    Tensor x = to_tensor(std::span<const Image>(inputs).subspan(first, count));
    if (spec.kind == AttackKind::image_erase) {
      for (int b = 0; b < count; ++b) {
        Rng rng = base.split(static_cast<std::uint64_t>(first + b));
        put_item(x, b, perturb_item(x.slice(b, 1), spec.kind, spec.perturbation, rng));
      }
    }
    FeatureBatch maps = model.extract(x);
    if (spec.kind != AttackKind::image_erase) {
      for (int b = 0; b < count; ++b) {
        Rng rng = base.split(static_cast<std::uint64_t>(first + b));
        put_item(maps, b, perturb_item(maps.slice(b, 1), spec.kind, spec.perturbation, rng));
      }
    }
    put_item(out, first, model.classifier().embed(maps));
  }
  return out;
}

EvalSet embed_eval_set(ReidModel& model, const DatasetIndex& data) {
  EvalSet set;
  set.query = clean_embed(model, split_images(data, Split::query));
  set.gallery = clean_embed(model, split_images(data, Split::gallery));
  split_labels(data, Split::query, set.query_ids, set.query_cams);
  split_labels(data, Split::gallery, set.gallery_ids, set.gallery_cams);
  return set;
}

RankingResult evaluate_model(ReidModel& model, const DatasetIndex& data, const EvalOptions& opts) {
  return evaluate(embed_eval_set(model, data), opts);
}

RankingResult attack_eval(ReidModel& model, const DatasetIndex& data, const AttackSpec& spec,
                          const EvalOptions& opts) {
  spec.validate();
  EvalSet set;
  const std::vector<Image> query = split_images(data, Split::query);
  const std::vector<Image> gallery = split_images(data, Split::gallery);
  const bool hit_query = spec.apply_to != AttackTarget::gallery;
  const bool hit_gallery = spec.apply_to != AttackTarget::query;
  set.query = hit_query ? attacked_embed(model, query, spec, 0) : clean_embed(model, query);
  set.gallery = hit_gallery ? attacked_embed(model, gallery, spec, 1) : clean_embed(model, gallery);
  split_labels(data, Split::query, set.query_ids, set.query_cams);
  split_labels(data, Split::gallery, set.gallery_ids, set.gallery_cams);
  return evaluate(set, opts);
}

// ---------------------------------------------------------------- heatmaps

HeatmapStat parse_heatmap_stat(std::string_view s) {
  if (s == "mean") return HeatmapStat::mean;
  if (s == "max") return HeatmapStat::max;
  throw InvalidConfig("heatmap statistic must be one of {mean, max}, got '" + std::string(s) +
                      "'");
}

Tensor activation_map(const FeatureBatch& map, HeatmapStat stat) {
  if (map.n() != 1) throw ShapeMismatch("activation_map expects a single feature map");
  const int c = map.c(), h = map.h(), w = map.w();
  Tensor out(1, 1, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Real acc = stat == HeatmapStat::mean ? 0.0 : map(0, 0, y, x);
      for (int k = 0; k < c; ++k) {
        acc = stat == HeatmapStat::mean ? acc + map(0, k, y, x) : std::max(acc, map(0, k, y, x));
      }
      out(0, 0, y, x) = stat == HeatmapStat::mean ? acc / c : acc;
    }
  }
  const auto [lo, hi] = std::minmax_element(out.data(), out.data() + out.size());
  const Real min = *lo, range = *hi - *lo;
  for (Real& v : out.span()) v = range > 0.0 ? (v - min) / range : 0.5;
  return out;
}

namespace {

std::array<double, 3> jet(double v) {
  auto ramp = [](double t) { return std::clamp(1.5 - std::abs(4.0 * t), 0.0, 1.0); };
  return {ramp(v - 0.75), ramp(v - 0.5), ramp(v - 0.25)};
}

double sample_bilinear(const Tensor& a, double fy, double fx) {
  const int h = a.h(), w = a.w();
  fy = std::clamp(fy, 0.0, h - 1.0);
  fx = std::clamp(fx, 0.0, w - 1.0);
  const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double dy = fy - y0, dx = fx - x0;
  return (1 - dy) * ((1 - dx) * a(0, 0, y0, x0) + dx * a(0, 0, y0, x1)) +
         dy * ((1 - dx) * a(0, 0, y1, x0) + dx * a(0, 0, y1, x1));
}

}  // namespace

Image heatmap_overlay(const Image& image, const Tensor& activation, double alpha) {
  Image out(image.height, image.width);
  const double sy = static_cast<double>(activation.h()) / image.height;
  const double sx = static_cast<double>(activation.w()) / image.width;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const double v = sample_bilinear(activation, (y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5);
      const auto rgb = jet(v);
      for (int c = 0; c < 3; ++c) {
        const double blended = (1.0 - alpha) * image.at(y, x, c) + alpha * 255.0 * rgb[c];
        out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(std::clamp(blended, 0.0, 255.0)));
      }
    }
  }
  return out;
}

void export_heatmap(ReidModel& model, const Image& image, const std::filesystem::path& path,
                    HeatmapStat stat, double alpha) {
  const std::vector<Image> input = model_inputs(model, std::span<const Image>(&image, 1));
  const FeatureBatch maps = model.extract(to_tensor(input[0]));
  write_png(path, heatmap_overlay(image, activation_map(maps, stat), alpha));
}

}  // namespace etnd
