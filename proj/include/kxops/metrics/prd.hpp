// Copyright 2026 The kxops Authors.
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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "kxops/core/embedding.hpp"
#include "kxops/metrics/kmeans.hpp"
#include "kxops/metrics/metric_value.hpp"

namespace kxops::metrics {

struct PrdPoint {
  double precision = 0.0;
  double recall = 0.0;
};

// PRD curve between a reference histogram `p` and a candidate histogram `q`.
// Slopes are lambda = tan(theta) for `grid` angles spaced uniformly in the
// open interval (0, pi/2); the middle angle is pi/4 whenever `grid` is odd.
inline std::vector<PrdPoint> prd_curve(std::span<const double> p, std::span<const double> q,
                                       std::size_t grid) {
  require(p.size() == q.size(), "PRD histograms must have equal length");
  require(grid >= 1, "PRD needs at least one slope");
  std::vector<PrdPoint> curve;
  curve.reserve(grid);
  for (std::size_t i = 0; i < grid; ++i) {
    const double theta = std::numbers::pi / 2.0 * static_cast<double>(i + 1) /
                         static_cast<double>(grid + 1);
    const double lambda = std::tan(theta);
    double alpha = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) alpha += std::min(lambda * p[c], q[c]);
    curve.push_back({alpha, alpha / lambda});
  }
  return curve;
}

inline double f1_of(const PrdPoint& pt) {
  const double s = pt.precision + pt.recall;
  return s > 0.0 ? 2.0 * pt.precision * pt.recall / s : 0.0;
}

inline double prd_max_f1(std::span<const double> p, std::span<const double> q,
                         std::size_t grid) {
  double best = 0.0;
  for (const auto& pt : prd_curve(p, q, grid)) best = std::max(best, f1_of(pt));
  return std::clamp(best, 0.0, 1.0);
}

struct PrOptions {
  std::size_t clusters = 20;
  std::size_t lambda_grid = 1001;
  KMeansOptions kmeans;
};

// Joint k-means quantization of x and y followed by the maximum F1 along the
// PRD curve of their cell histograms.
inline MetricValue pr_f1(const EmbeddingMatrix& x, const EmbeddingMatrix& y,
                         const PrOptions& options, std::uint64_t seed = 0) {
  require_same_dim(x, y);
  require(options.clusters >= 2, "PR metric needs at least 2 clusters");
  const std::size_t pooled = x.n_rows() + y.n_rows();
  if (pooled < options.clusters) {
    fail(ErrorKind::kInvalidArgument, "PR metric: " + std::to_string(pooled) +
                                          " samples are too few for " +
                                          std::to_string(options.clusters) + " clusters");
  }
  Eigen::MatrixXd points(static_cast<Eigen::Index>(pooled), static_cast<Eigen::Index>(x.dim()));
  points.topRows(static_cast<Eigen::Index>(x.n_rows())) = to_eigen(x);
  points.bottomRows(static_cast<Eigen::Index>(y.n_rows())) = to_eigen(y);

  const auto km = kmeans(points, options.clusters, seed, options.kmeans);
  const auto p = label_histogram(km.labels, 0, x.n_rows(), options.clusters);
  const auto q = label_histogram(km.labels, x.n_rows(), pooled, options.clusters);
  return MetricValue::of(Metric::kPrF1, prd_max_f1(p, q, options.lambda_grid));
}

inline MetricValue pr_f1(const EmbeddingMatrix& x, const EmbeddingMatrix& y,
                         std::size_t clusters, std::size_t lambda_grid,
                         std::uint64_t seed = 0) {
  PrOptions options;
  options.clusters = clusters;
  options.lambda_grid = lambda_grid;
  return pr_f1(x, y, options, seed);
}

}  // namespace kxops::metrics
