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

#include <array>
#include <cstdint>
#include <vector>

#include "etnd/image.hpp"

namespace etnd {

struct Series {
  std::vector<double> values;  // y in [0, 1], x = 1..values.size()
  std::array<std::uint8_t, 3> color{31, 119, 180};
};

/// Line chart on a white canvas with a light grid at every 0.1 of y and
/// every 10 steps of x.
Image plot_series(const std::vector<Series>& series, int height = 300, int width = 400);

/// Color of the i-th curve in a chart.
std::array<std::uint8_t, 3> palette_color(std::size_t i);

}  // namespace etnd
