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

#include "etnd/retrieval_eval.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "etnd/errors.hpp"

namespace etnd {

Metric parse_metric(std::string_view s) {
  if (s == "euclidean") return Metric::euclidean;
  if (s == "cosine") return Metric::cosine;
  throw InvalidConfig("metric must be one of {euclidean, cosine}, got '" + std::string(s) + "'");
}

std::string_view to_string(Metric m) { return m == Metric::euclidean ? "euclidean" : "cosine"; }

namespace {
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMapMat = Eigen::Map<const RowMat>;
}  // namespace

Tensor pairwise_distances(const Tensor& queries, const Tensor& gallery, Metric metric) {
  const int dim = static_cast<int>(queries.item_size());
  if (static_cast<int>(gallery.item_size()) != dim) {
    throw DimensionMismatch("query dimension " + std::to_string(dim) +
                            " differs from gallery dimension " +
                            std::to_string(gallery.item_size()));
  }
  const int nq = queries.n(), ng = gallery.n();
  ConstMapMat q(queries.data(), nq, dim);
  ConstMapMat g(gallery.data(), ng, dim);
  const RowMat dots = q * g.transpose();
  const Eigen::VectorXd qn = q.rowwise().squaredNorm();
  const Eigen::VectorXd gn = g.rowwise().squaredNorm();
  Tensor d(nq, ng);
  for (int i = 0; i < nq; ++i) {
    for (int j = 0; j < ng; ++j) {
      if (metric == Metric::euclidean) {
        d(i, j) = std::sqrt(std::max(0.0, qn(i) + gn(j) - 2.0 * dots(i, j)));
      } else {
        const Real denom = std::sqrt(qn(i) * gn(j));
        d(i, j) = denom > 0.0 ? 1.0 - dots(i, j) / denom : 1.0;
      }
    }
  }
  return d;
}

Tensor l2_normalize_rows(const Tensor& x) {
  Tensor out = x;
  const std::size_t dim = x.item_size();
  for (int i = 0; i < x.n(); ++i) {
    Real* row = out.data() + static_cast<std::size_t>(i) * dim;
    Real s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) s += row[k] * row[k];
    if (s <= 0.0) continue;
    const Real inv = 1.0 / std::sqrt(s);
    for (std::size_t k = 0; k < dim; ++k) row[k] *= inv;
  }
  return out;
}

RankingResult evaluate_distances(const Tensor& distances, const std::vector<int>& query_ids,
                                 const std::vector<int>& gallery_ids,
                                 const std::vector<int>& query_cams,
                                 const std::vector<int>& gallery_cams, int max_rank,
                                 bool cross_camera_filter) {
  const int nq = distances.n(), ng = distances.c();
  if (static_cast<int>(query_ids.size()) != nq || static_cast<int>(gallery_ids.size()) != ng) {
    throw DimensionMismatch("identity label count does not match the distance matrix");
  }
  if (max_rank < 1) throw InvalidConfig("max_rank must be >= 1");
  const bool cams = !query_cams.empty() && !gallery_cams.empty();
  if (cams && (static_cast<int>(query_cams.size()) != nq ||
               static_cast<int>(gallery_cams.size()) != ng)) {
    throw DimensionMismatch("camera label count does not match the distance matrix");
  }
  const bool filter = cross_camera_filter && cams;

  RankingResult r;
  r.num_queries = nq;
  std::vector<double> hits(static_cast<std::size_t>(max_rank), 0.0);
  std::vector<int> order(static_cast<std::size_t>(ng));
  for (int qi = 0; qi < nq; ++qi) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return distances(qi, a) < distances(qi, b); });
    int rank = 0, correct = 0, first_hit = -1;
    double precision_sum = 0.0;
    for (int g : order) {
      if (filter && gallery_ids[static_cast<std::size_t>(g)] == query_ids[static_cast<std::size_t>(qi)] &&
          gallery_cams[static_cast<std::size_t>(g)] == query_cams[static_cast<std::size_t>(qi)]) {
        continue;
      }
      ++rank;
      if (gallery_ids[static_cast<std::size_t>(g)] == query_ids[static_cast<std::size_t>(qi)]) {
        ++correct;
        if (first_hit < 0) first_hit = rank;
        precision_sum += static_cast<double>(correct) / rank;
      }
    }
    if (correct == 0) {
      ++r.num_skipped;
      continue;
    }
    r.per_query_ap.push_back(precision_sum / correct);
    for (int k = first_hit; k <= max_rank; ++k) hits[static_cast<std::size_t>(k - 1)] += 1.0;
  }
  const int valid = nq - r.num_skipped;
  if (valid == 0) throw NoValidGallery("no query has a valid gallery match");
  r.cmc.resize(hits.size());
  for (std::size_t k = 0; k < hits.size(); ++k) r.cmc[k] = hits[k] / valid;
  r.map = std::accumulate(r.per_query_ap.begin(), r.per_query_ap.end(), 0.0) / valid;
  return r;
}

RankingResult evaluate(const EvalSet& set, const EvalOptions& opts) {
  const Tensor q = opts.l2_normalize ? l2_normalize_rows(set.query) : set.query;
  const Tensor g = opts.l2_normalize ? l2_normalize_rows(set.gallery) : set.gallery;
  const Tensor d = pairwise_distances(q, g, opts.metric);
  return evaluate_distances(d, set.query_ids, set.gallery_ids, set.query_cams, set.gallery_cams,
                            opts.max_rank, opts.cross_camera_filter);
}

nlohmann::ordered_json to_json(const RankingResult& r, const EvalOptions& opts) {
  nlohmann::ordered_json j;
  j["config"] = {{"metric", std::string(to_string(opts.metric))},
                 {"max_rank", opts.max_rank},
                 {"cross_camera_filter", opts.cross_camera_filter},
                 {"l2_normalize", opts.l2_normalize}};
  j["metric"] = std::string(to_string(opts.metric));
  j["cross_camera_filter"] = opts.cross_camera_filter;
  j["cmc"] = r.cmc;
  j["rank1"] = r.rank1();
  j["map"] = r.map;
  j["num_queries"] = r.num_queries;
  j["num_skipped_queries"] = r.num_skipped;
  return j;
}

}  // namespace etnd
