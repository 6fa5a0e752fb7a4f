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

#include <json.hpp>
#include <string_view>
#include <vector>

#include "etnd/tensor.hpp"

namespace etnd {

enum class Metric { euclidean, cosine };
Metric parse_metric(std::string_view s);
std::string_view to_string(Metric m);

/// Rows of `queries` (Q, D) against rows of `gallery` (G, D) -> (Q, G).
/// Cosine distance is 1 - cosine similarity.
Tensor pairwise_distances(const Tensor& queries, const Tensor& gallery, Metric metric);

/// Scales every row to unit L2 norm (zero rows are left unchanged).
Tensor l2_normalize_rows(const Tensor& x);

struct EvalSet {
  Tensor query;    // (Q, D)
  Tensor gallery;  // (G, D)
  std::vector<int> query_ids;
  std::vector<int> gallery_ids;
  std::vector<int> query_cams;    // empty when unknown
  std::vector<int> gallery_cams;  // empty when unknown
};

struct EvalOptions {
  Metric metric = Metric::euclidean;
  int max_rank = 50;
  /// Drop gallery items sharing both identity and camera with the query.
  /// Has no effect when camera labels are missing.
  bool cross_camera_filter = true;
  /// Normalize embeddings to unit length before computing distances.
  bool l2_normalize = true;
};

struct RankingResult {
  std::vector<double> cmc;  // cmc[k-1] = fraction of queries matched within rank k
  double map = 0.0;
  std::vector<double> per_query_ap;  // evaluated queries only, in query order
  int num_queries = 0;
  int num_skipped = 0;

  double rank1() const { return cmc.empty() ? 0.0 : cmc[0]; }
};

/// Ranking from a precomputed (Q, G) distance matrix. Ties are broken by
/// gallery index. Queries without any valid match are skipped and counted;
/// throws NoValidGallery when every query is skipped.
RankingResult evaluate_distances(const Tensor& distances, const std::vector<int>& query_ids,
                                 const std::vector<int>& gallery_ids,
                                 const std::vector<int>& query_cams,
                                 const std::vector<int>& gallery_cams, int max_rank,
                                 bool cross_camera_filter);

RankingResult evaluate(const EvalSet& set, const EvalOptions& opts);

/// Result-file record: config echo, metric, filter flag, cmc, map, skipped count.
nlohmann::ordered_json to_json(const RankingResult& r, const EvalOptions& opts);

}  // namespace etnd
