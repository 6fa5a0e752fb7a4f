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

#include "etnd/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <regex>

#include "etnd/errors.hpp"

namespace etnd {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::query: return "query";
    case Split::gallery: return "gallery";
  }
  return "?";
}

OccluderStyle parse_occluder_style(std::string_view s) {
  if (s == "textured") return OccluderStyle::textured;
  if (s == "solid") return OccluderStyle::solid;
  if (s == "noise") return OccluderStyle::noise;
  throw InvalidConfig("occluder style must be one of {textured, solid, noise}, got '" + std::string(s) + "'");
}

std::string_view to_string(OccluderStyle s) {
  switch (s) {
    case OccluderStyle::textured: return "textured";
    case OccluderStyle::solid: return "solid";
    case OccluderStyle::noise: return "noise";
  }
  return "?";
}

std::vector<std::size_t> DatasetIndex::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].split == s) out.push_back(i);
  return out;
}

bool DatasetIndex::has_cameras(Split s) const {
  return std::all_of(records.begin(), records.end(),
                     [s](const Record& r) { return r.split != s || r.camera >= 0; });
}

// ---------------------------------------------------------------- directories

std::optional<ParsedName> parse_filename(std::string_view filename) {
  static const std::regex re(R"(^(\d+)_c(\d+)(?:s\d+)?_(\d+)(?:_\d+)*\.(?:jpg|jpeg|png|JPG|JPEG|PNG)$)");
  std::cmatch m;
  if (!std::regex_match(filename.begin(), filename.end(), m, re)) return std::nullopt;
  return ParsedName{std::stoi(m[1].str()), std::stoi(m[2].str()), std::stol(m[3].str())};
}

namespace {

bool is_image_file(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ".png" || e == ".jpg" || e == ".jpeg";
}

std::filesystem::path find_split_dir(const std::filesystem::path& root, Split s) {
  const std::vector<std::string> names =
      s == Split::train   ? std::vector<std::string>{"train", "bounding_box_train"}
      : s == Split::query ? std::vector<std::string>{"query"}
                          : std::vector<std::string>{"gallery", "bounding_box_test"};
  for (const auto& n : names) {
    if (std::filesystem::is_directory(root / n)) return root / n;
  }
  return {};
}

}  // namespace

DatasetIndex load_directory(const std::filesystem::path& root, int image_h, int image_w) {
  if (!std::filesystem::is_directory(root)) {
    throw IoFailure("dataset root is not a directory: " + root.string());
  }
  DatasetIndex index;
  index.image_h = image_h;
  index.image_w = image_w;
  for (Split s : {Split::train, Split::query, Split::gallery}) {
    const auto dir = find_split_dir(root, s);
    if (dir.empty()) continue;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto parsed = parse_filename(f.filename().string());
      if (!parsed) throw MalformedFilename("malformed dataset filename: " + f.string());
      Record r;
      r.path = f.string();
      r.image = resize_bilinear(read_image(f), image_h, image_w);
      r.original_identity = parsed->identity;
      r.identity = parsed->identity;
      r.camera = parsed->camera;
      r.split = s;
      index.records.push_back(std::move(r));
    }
  }
  if (index.records.empty()) throw EmptyDataset("no images found under " + root.string());

  for (const Record& r : index.records)
    if (r.split == Split::train) index.train_identity_map.emplace(r.original_identity, 0);
  int next = 0;
  for (auto& [orig, label] : index.train_identity_map) label = next++;
  for (Record& r : index.records)
    if (r.split == Split::train) r.identity = index.train_identity_map.at(r.original_identity);
  return index;
}

void write_directory(const DatasetIndex& index, const std::filesystem::path& root) {
  std::map<std::pair<int, int>, long> seq;
  for (Split s : {Split::train, Split::query, Split::gallery}) {
    std::filesystem::create_directories(root / std::string(to_string(s)));
  }
  for (const Record& r : index.records) {
    const int cam = std::max(r.camera, 0);
    const long n = seq[{static_cast<int>(r.split), r.original_identity}]++;
    char name[64];
    std::snprintf(name, sizeof(name), "%04d_c%d_%06ld.png", r.original_identity, cam, n);
    write_png(root / std::string(to_string(r.split)) / name, r.image);
  }
}

std::string identity_map_json(const DatasetIndex& index) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [orig, label] : index.train_identity_map) j[std::to_string(orig)] = label;
  return j.dump(2);
}

// ---------------------------------------------------------------- synthesis

void SynthSpec::validate() const {
  if (num_identities < 1 || num_test_identities < 1) throw InvalidConfig("synth identity counts must be >= 1");
  if (train_images_per_identity < 1 || query_images_per_identity < 1 ||
      gallery_images_per_identity < 1) {
    throw InvalidConfig("synth images per identity must be >= 1");
  }
  if (image_h < 8 || image_w < 8) throw InvalidConfig("synth image size must be at least 8x8");
  if (!(occlusion_probability >= 0.0 && occlusion_probability <= 1.0)) {
    throw InvalidConfig("synth occlusion_probability must lie in [0, 1]");
  }
  if (!(occluder_area_min > 0.0 && occluder_area_min <= occluder_area_max &&
        occluder_area_max <= 1.0)) {
    throw InvalidConfig("synth occluder area bounds must satisfy 0 < min <= max <= 1");
  }
}

namespace {

constexpr int kBands = 4;
constexpr int kPaletteSize = 12;
constexpr std::uint8_t kPalette[kPaletteSize][3] = {
    {220, 40, 40},  {40, 180, 60},  {50, 80, 220},  {230, 210, 50},
    {240, 140, 30}, {150, 60, 200}, {40, 200, 210}, {245, 245, 245},
    {30, 30, 30},   {140, 90, 50},  {240, 120, 180}, {120, 130, 140}};

enum Texture { kSolid, kHStripes, kVStripes, kChecker, kTextureCount };

struct Band {
  int primary;
  int secondary;
  int texture;
  int period;
};

struct Signature {
  Band bands[kBands];
  int width_permille;  // body width relative to the image
};

Signature make_signature(Rng rng) {
  Signature s{};
  for (Band& b : s.bands) {
    b.primary = static_cast<int>(rng.below(kPaletteSize));
    b.secondary = static_cast<int>((b.primary + 1 + rng.below(kPaletteSize - 1)) % kPaletteSize);
    b.texture = static_cast<int>(rng.below(kTextureCount));
    b.period = 2 + static_cast<int>(rng.below(3));
  }
  s.width_permille = 550 + static_cast<int>(rng.below(151));
  return s;
}

int uniform_int(Rng& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

std::uint8_t clamp_byte(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

bool texture_on(int texture, int period, int y, int x) {
  switch (texture) {
    case kHStripes: return (y / period) % 2 == 1;
    case kVStripes: return (x / period) % 2 == 1;
    case kChecker: return ((y / period) + (x / period)) % 2 == 1;
    default: return false;
  }
}

Image render(const Signature& sig, const SynthSpec& spec, Rng& rng) {
  const int h = spec.image_h, w = spec.image_w;
  Image img(h, w);
  const int bg = uniform_int(rng, 40, 160);
  const int bg_tint[3] = {uniform_int(rng, -30, 30), uniform_int(rng, -30, 30), uniform_int(rng, -30, 30)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = clamp_byte(bg + bg_tint[c] + uniform_int(rng, -20, 20));

  const int jitter_y = std::max(1, h / 32), jitter_x = std::max(1, w / 16);
  const int dy = uniform_int(rng, -jitter_y, jitter_y);
  const int dx = uniform_int(rng, -jitter_x, jitter_x);
  const int brightness = uniform_int(rng, -24, 24);
  const int body_w = w * sig.width_permille / 1000;
  const int body_h = h * 7 / 8;
  const int top = (h - body_h) / 2 + dy;
  const int left = (w - body_w) / 2 + dx;
  for (int y = 0; y < body_h; ++y) {
    const int band = std::min(kBands - 1, y * kBands / body_h);
    const Band& b = sig.bands[band];
    for (int x = 0; x < body_w; ++x) {
      const int py = top + y, px = left + x;
      if (py < 0 || py >= h || px < 0 || px >= w) continue;
      const int color = texture_on(b.texture, b.period, y, x) ? b.secondary : b.primary;
      for (int c = 0; c < 3; ++c) {
        img.at(py, px, c) = clamp_byte(kPalette[color][c] + brightness + uniform_int(rng, -8, 8));
      }
    }
  }
  return img;
}

void occlude(Image& img, const SynthSpec& spec, Rng& rng) {
  const int h = img.height, w = img.width;
  const int lo = static_cast<int>(spec.occluder_area_min * 1000);
  const int hi = static_cast<int>(spec.occluder_area_max * 1000);
  const int area = h * w * uniform_int(rng, lo, hi) / 1000;
  // aspect (height / width) in [1/2, 2], stored as permille
  const int aspect = uniform_int(rng, 500, 2000);
  int oh = 1, ow = 1;
  // integer search for the largest oh with oh * (oh * 1000 / aspect) <= area
  while ((oh + 1) * ((oh + 1) * 1000 / aspect) <= area && oh + 1 <= h) ++oh;
  ow = std::clamp(oh * 1000 / aspect, 1, w);
  oh = std::clamp(oh, 1, h);
  const int y0 = uniform_int(rng, 0, h - oh);
  const int x0 = uniform_int(rng, 0, w - ow);
  if (spec.occluder_style == OccluderStyle::solid) {
    const int rgb[3] = {uniform_int(rng, 0, 255), uniform_int(rng, 0, 255), uniform_int(rng, 0, 255)};
    for (int y = y0; y < y0 + oh; ++y)
      for (int x = x0; x < x0 + ow; ++x)
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<std::uint8_t>(rgb[c]);
    return;
  }
  if (spec.occluder_style == OccluderStyle::noise) {
    for (int y = y0; y < y0 + oh; ++y)
      for (int x = x0; x < x0 + ow; ++x)
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<std::uint8_t>(uniform_int(rng, 0, 255));
    return;
  }
  const int primary = static_cast<int>(rng.below(kPaletteSize));
  const int secondary = static_cast<int>(rng.below(kPaletteSize));
  const int texture = static_cast<int>(rng.below(kTextureCount));
  const int period = 2 + static_cast<int>(rng.below(4));
  for (int y = y0; y < y0 + oh; ++y)
    for (int x = x0; x < x0 + ow; ++x) {
      const int color = texture_on(texture, period, y, x) ? secondary : primary;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = kPalette[color][c];
    }
}

}  // namespace

DatasetIndex synth_generate(const SynthSpec& spec) {
  spec.validate();
  DatasetIndex index;
  index.image_h = spec.image_h;
  index.image_w = spec.image_w;
  const Rng master(spec.seed);
  const int total_ids = spec.num_identities + spec.num_test_identities;
  // probability compared in integer permille to keep rendering integer-only
  const int occ_permille = static_cast<int>(spec.occlusion_probability * 1000 + 0.5);
  for (int id = 0; id < total_ids; ++id) {
    const Signature sig = make_signature(master.split(static_cast<std::uint64_t>(id)));
    Rng rng = master.split(0x10000ULL + static_cast<std::uint64_t>(id));
    auto add = [&](Split split, int camera, bool maybe_occlude) {
      Record r;
      r.image = render(sig, spec, rng);
      if (maybe_occlude && uniform_int(rng, 0, 999) < occ_permille) occlude(r.image, spec, rng);
      r.original_identity = id;
      r.identity = id;
      r.camera = camera;
      r.split = split;
      index.records.push_back(std::move(r));
    };
    if (id < spec.num_identities) {
      for (int i = 0; i < spec.train_images_per_identity; ++i) {
        add(Split::train, static_cast<int>(rng.below(2)), false);
      }
      index.train_identity_map.emplace(id, id);
    } else {
      for (int i = 0; i < spec.query_images_per_identity; ++i) add(Split::query, 0, true);
      for (int i = 0; i < spec.gallery_images_per_identity; ++i) add(Split::gallery, 1, false);
    }
  }
  return index;
}

// ---------------------------------------------------------------- PK sampling

PkSampler::PkSampler(const DatasetIndex& index, int p, int k, Rng rng)
    : p_(p), k_(k), rng_(rng) {
  if (p < 1 || k < 1) throw InvalidConfig("P and K must be >= 1");
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < index.records.size(); ++i) {
    const Record& r = index.records[i];
    if (r.split == Split::train) {
      groups[r.identity].push_back(i);
      ++num_images_;
    }
  }
  for (auto& [id, items] : groups) by_identity_.push_back(std::move(items));
  if (static_cast<int>(by_identity_.size()) < p) {
    throw TooFewIdentities("PK sampling needs at least " + std::to_string(p) +
                           " training identities, found " + std::to_string(by_identity_.size()));
  }
}

int PkSampler::batches_per_epoch() const {
  const std::size_t per = static_cast<std::size_t>(p_) * k_;
  return static_cast<int>((num_images_ + per - 1) / per);
}

std::vector<std::size_t> PkSampler::next_batch() {
  const std::size_t n_ids = by_identity_.size();
  // partial Fisher-Yates for P identities
  std::vector<std::size_t> ids(n_ids);
  for (std::size_t i = 0; i < n_ids; ++i) ids[i] = i;
  for (int i = 0; i < p_; ++i) {
    const std::size_t j = static_cast<std::size_t>(i) + rng_.below(n_ids - static_cast<std::size_t>(i));
    std::swap(ids[static_cast<std::size_t>(i)], ids[j]);
  }
  std::vector<std::size_t> batch;
  batch.reserve(static_cast<std::size_t>(p_) * k_);
  for (int i = 0; i < p_; ++i) {
    std::vector<std::size_t> items = by_identity_[ids[static_cast<std::size_t>(i)]];
    if (static_cast<int>(items.size()) >= k_) {
      for (int j = 0; j < k_; ++j) {
        const std::size_t pick = static_cast<std::size_t>(j) + rng_.below(items.size() - static_cast<std::size_t>(j));
        std::swap(items[static_cast<std::size_t>(j)], items[pick]);
        batch.push_back(items[static_cast<std::size_t>(j)]);
      }
    } else {
      for (int j = 0; j < k_; ++j) batch.push_back(items[rng_.below(items.size())]);
    }
  }
  return batch;
}

// ---------------------------------------------------------------- augmentation

void AugmentConfig::validate() const {
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) throw InvalidConfig("flip_probability must lie in [0, 1]");
  if (!(erase_probability >= 0.0 && erase_probability <= 1.0)) throw InvalidConfig("erase_probability must lie in [0, 1]");
  if (pad < 0) throw InvalidConfig("pad must be >= 0");
  erase.validate();
}

Image augment(const Image& image, RandomSource& rng, bool train_mode, const AugmentConfig& cfg,
              int height, int width) {
  Image img = resize_bilinear(image, height, width);
  if (!train_mode) return img;

  if (rng.uniform() < cfg.flip_probability) img = flip_horizontal(img);

  if (cfg.pad > 0) {
    const int ph = height + 2 * cfg.pad, pw = width + 2 * cfg.pad;
    const int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(ph - height + 1)));
    const int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(pw - width + 1)));
    Image out(height, width, 0);
    for (int y = 0; y < height; ++y) {
      const int sy = y + oy - cfg.pad;
      if (sy < 0 || sy >= height) continue;
      for (int x = 0; x < width; ++x) {
        const int sx = x + ox - cfg.pad;
        if (sx < 0 || sx >= width) continue;
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
      }
    }
    img = std::move(out);
  }

  if (rng.uniform() < cfg.erase_probability) {
    try {
      const Region r = sample_region(rng, GridShape{height, width}, cfg.erase);
      for (int y = r.y; y < r.y + r.h; ++y)
        for (int x = r.x; x < r.x + r.w; ++x)
          for (int c = 0; c < 3; ++c) {
            img.at(y, x, c) = static_cast<std::uint8_t>(std::lround(kPixelMean[c] * 255.0));
          }
    } catch (const SamplingExhausted&) {
      // leave the image unerased
    }
  }
  return img;
}

}  // namespace etnd
