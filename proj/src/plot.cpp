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

#include "etnd/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace etnd {

namespace {

constexpr int kMargin = 20;

void put(Image& img, int x, int y, const std::array<std::uint8_t, 3>& c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  for (int k = 0; k < 3; ++k) img.at(y, x, k) = c[k];
}

void line(Image& img, int x0, int y0, int x1, int y1, const std::array<std::uint8_t, 3>& c) {
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    put(img, x0, y0, c);
    put(img, x0, y0 + 1, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) { err += dy; x0 += sx; }
    if (e2 <= dx) { err += dx; y0 += sy; }
  }
}

}  // namespace

std::array<std::uint8_t, 3> palette_color(std::size_t i) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 8> kColors{{
      {31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40},
      {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127}}};
  return kColors[i % kColors.size()];
}

Image plot_series(const std::vector<Series>& series, int height, int width) {
  Image img(height, width, 255);
  const int x0 = kMargin, x1 = width - kMargin, y0 = height - kMargin, y1 = kMargin;
  std::size_t n = 1;
  for (const Series& s : series) n = std::max(n, s.values.size());
  auto px = [&](double i) {
    return n == 1 ? x0 : x0 + static_cast<int>(std::lround(i * (x1 - x0) / (n - 1.0)));
  };
  auto py = [&](double v) { return y0 - static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * (y0 - y1))); };

  const std::array<std::uint8_t, 3> grid{225, 225, 225}, axis{0, 0, 0};
  for (int t = 1; t <= 10; ++t) line(img, x0, py(t / 10.0), x1, py(t / 10.0), grid);
  for (std::size_t i = 9; i < n; i += 10) line(img, px(i), y0, px(i), y1, grid);
  line(img, x0, y0, x1, y0, axis);
  line(img, x0, y0, x0, y1, axis);
  for (const Series& s : series) {
    for (std::size_t i = 1; i < s.values.size(); ++i) {
      line(img, px(i - 1), py(s.values[i - 1]), px(i), py(s.values[i]), s.color);
    }
    if (s.values.size() == 1) put(img, px(0), py(s.values[0]), s.color);
  }
  return img;
}

}  // namespace etnd
