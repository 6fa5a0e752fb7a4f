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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "etnd/image.hpp"
#include "etnd/region_sampler.hpp"
#include "etnd/rng.hpp"

namespace etnd {

enum class Split { train, query, gallery };
std::string_view to_string(Split s);

struct Record {
  std::string path;    // empty for in-memory datasets
  Image image;         // always populated, already at the dataset image size
  int identity = 0;    // contiguous within train; original id otherwise
  int original_identity = 0;
  int camera = -1;     // -1 when unknown
  Split split = Split::train;
};

struct DatasetIndex {
  std::vector<Record> records;
  /// original id -> contiguous train label
  std::map<int, int> train_identity_map;
  int image_h = 0;
  int image_w = 0;

  std::vector<std::size_t> indices(Split s) const;
  int num_train_identities() const { return static_cast<int>(train_identity_map.size()); }
  bool has_cameras(Split s) const;
};

struct ParsedName {
  int identity;
  int camera;
  long sequence;
};

/// Parses `<identity>_c<camera>_<seq>.<ext>`. Market-style names with an
/// `s<session>` suffix on the camera and extra `_<n>` groups are accepted.
std::optional<ParsedName> parse_filename(std::string_view filename);

/// Loads `<root>/{train,query,gallery}` (or the Market-1501 directory names
/// bounding_box_train / bounding_box_test), resizing every image.
DatasetIndex load_directory(const std::filesystem::path& root, int image_h, int image_w);

/// Writes a dataset in the directory layout `load_directory` reads.
void write_directory(const DatasetIndex& index, const std::filesystem::path& root);

/// JSON object {"<original_id>": contiguous_id, ...}.
std::string identity_map_json(const DatasetIndex& index);

/// textured: palette colors and stripes, like a clothing band.
/// solid: one random color. noise: independent random pixels.
enum class OccluderStyle { textured, solid, noise };
OccluderStyle parse_occluder_style(std::string_view s);
std::string_view to_string(OccluderStyle s);

struct SynthSpec {
  int num_identities = 50;        // training identities
  int num_test_identities = 50;   // disjoint from training identities
  int train_images_per_identity = 12;
  int query_images_per_identity = 6;
  int gallery_images_per_identity = 4;
  int image_h = 64;
  int image_w = 32;
  double occlusion_probability = 1.0;  // query images only
  double occluder_area_min = 0.2;      // fraction of the image
  double occluder_area_max = 0.4;
  OccluderStyle occluder_style = OccluderStyle::textured;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Renders identity signatures (per-band colors and textures) with jitter,
/// occluding query images with opaque rectangles. Integer arithmetic only.
DatasetIndex synth_generate(const SynthSpec& spec);

/// Draws P identities without replacement, then K images of each (with
/// replacement only for identities holding fewer than K images).
class PkSampler {
 public:
  PkSampler(const DatasetIndex& index, int p, int k, Rng rng);

  std::vector<std::size_t> next_batch();
  /// ceil(train images / (P * K))
  int batches_per_epoch() const;
  const Rng& rng() const { return rng_; }
  void set_rng(const Rng& r) { rng_ = r; }

 private:
  int p_, k_;
  std::vector<std::vector<std::size_t>> by_identity_;
  std::size_t num_images_ = 0;
  Rng rng_;
};

struct AugmentConfig {
  double flip_probability = 0.5;
  int pad = 10;
  double erase_probability = 0.5;
  PerturbationConfig erase;  // area/aspect bounds of the erased rectangle

  void validate() const;
};

/// Train mode: flip, pad-and-crop, random erasing (mean-pixel fill).
/// Eval mode: identity after resizing to (height, width).
Image augment(const Image& image, RandomSource& rng, bool train_mode, const AugmentConfig& cfg,
              int height, int width);

}  // namespace etnd
