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
#include <span>
#include <vector>

#include "etnd/tensor.hpp"

namespace etnd {

/// 8-bit RGB raster, row-major, interleaved channels.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, fill) {}

  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  friend bool operator==(const Image&, const Image&) = default;
};

/// Reads PNG or JPEG (by extension). Throws IoFailure.
Image read_image(const std::filesystem::path& path);
/// Writes an 8-bit RGB PNG. Throws IoFailure.
void write_png(const std::filesystem::path& path, const Image& img);

Image resize_bilinear(const Image& img, int height, int width);
Image flip_horizontal(const Image& img);

/// Per-channel normalization applied when images enter the network.
inline constexpr Real kPixelMean[3] = {0.485, 0.456, 0.406};
inline constexpr Real kPixelStd[3] = {0.229, 0.224, 0.225};

/// (B, 3, H, W) normalized network input. All images must share one size.
Tensor to_tensor(std::span<const Image> images);
Tensor to_tensor(const Image& image);

}  // namespace etnd
