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

#include <cmath>
#include <vector>

// Brute-force ranking metrics written directly from the definitions:
// the rank of a gallery item is 1 + the number of valid items that precede
// it (smaller distance, or equal distance and smaller index).
namespace oracle {

struct Metrics {
  std::vector<double> cmc;
  double map = 0.0;
  int evaluated = 0;
};

inline Metrics rank_metrics(const std::vector<std::vector<double>>& dist, const std::vector<int>& qid,
                            const std::vector<int>& gid, const std::vector<int>& qcam,
                            const std::vector<int>& gcam, int max_rank, bool filter) {
  Metrics m;
  m.cmc.assign(max_rank, 0.0);
  const std::size_t G = gid.size();
  for (std::size_t q = 0; q < qid.size(); ++q) {
    auto valid = [&](std::size_t g) {
      if (!filter || qcam.empty() || gcam.empty()) return true;
      return !(gid[g] == qid[q] && gcam[g] == qcam[q]);
    };
    auto rank_of = [&](std::size_t g) {
      int r = 1;
      for (std::size_t o = 0; o < G; ++o) {
        if (o == g || !valid(o)) continue;
        if (dist[q][o] < dist[q][g] || (dist[q][o] == dist[q][g] && o < g)) ++r;
      }
      return r;
    };
    std::vector<int> correct_ranks;
    for (std::size_t g = 0; g < G; ++g)
      if (valid(g) && gid[g] == qid[q]) correct_ranks.push_back(rank_of(g));
    if (correct_ranks.empty()) continue;
    ++m.evaluated;
    int first = correct_ranks[0];
    for (int r : correct_ranks) first = std::min(first, r);
    for (int k = 1; k <= max_rank; ++k)
      if (first <= k) m.cmc[k - 1] += 1.0;
    double ap = 0.0;
    for (int r : correct_ranks) {
      int hits = 0;
      for (int o : correct_ranks) hits += o <= r;
      ap += static_cast<double>(hits) / r;
    }
    m.map += ap / correct_ranks.size();
  }
  if (m.evaluated > 0) {
    for (double& c : m.cmc) c /= m.evaluated;
    m.map /= m.evaluated;
  }
  return m;
}

}  // namespace oracle
