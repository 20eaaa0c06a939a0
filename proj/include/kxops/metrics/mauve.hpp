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
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kxops/core/embedding.hpp"
#include "kxops/metrics/kmeans.hpp"
#include "kxops/metrics/metric_value.hpp"

namespace kxops::metrics {

struct MauveOptions {
  // Unset: 2 * sqrt(pooled rows), capped at 50.
  std::optional<std::size_t> clusters;
  // Capped at the embedding dimension.
  std::size_t pca_dims = 16;
  double scale = 5.0;
  std::size_t mixture_grid = 101;
  double smoothing = 1e-6;
  KMeansOptions kmeans;
};

inline std::size_t default_mauve_clusters(std::size_t pooled_rows) {
  const auto k = static_cast<std::size_t>(
      std::lround(2.0 * std::sqrt(static_cast<double>(pooled_rows))));
  return std::clamp<std::size_t>(k, 2, 50);
}

struct FrontierPoint {
  double x = 0.0;  // exp(-c KL(Q || R_w))
  double y = 0.0;  // exp(-c KL(P || R_w))
};

namespace detail {

inline std::vector<double> smooth(std::span<const double> h, double eps) {
  std::vector<double> out(h.begin(), h.end());
  double total = 0.0;
  for (double& v : out) {
    v += eps;
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

inline double kl(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > 0.0) s += a[i] * std::log(a[i] / b[i]);
  }
  return std::max(0.0, s);
}

}  // namespace detail

// Divergence frontier of two histograms, including the extreme points (1, 0)
// and (0, 1). Mixture weights are `grid` points spread evenly over
// [1e-6, 1 - 1e-6].
inline std::vector<FrontierPoint> divergence_frontier(std::span<const double> p_raw,
                                                      std::span<const double> q_raw,
                                                      double scale, std::size_t grid,
                                                      double smoothing) {
  require(p_raw.size() == q_raw.size(), "Mauve histograms must have equal length");
  require(scale > 0.0, "Mauve scale must be positive");
  require(grid >= 2, "Mauve mixture grid needs at least 2 weights");
  const auto p = detail::smooth(p_raw, smoothing);
  const auto q = detail::smooth(q_raw, smoothing);

  std::vector<FrontierPoint> curve;
  curve.reserve(grid + 2);
  curve.push_back({1.0, 0.0});
  std::vector<double> r(p.size());
  constexpr double kEdge = 1e-6;
  for (std::size_t i = 0; i < grid; ++i) {
    const double w = kEdge + (1.0 - 2.0 * kEdge) * static_cast<double>(i) /
                                 static_cast<double>(grid - 1);
    for (std::size_t c = 0; c < p.size(); ++c) r[c] = w * p[c] + (1.0 - w) * q[c];
    curve.push_back({std::exp(-scale * detail::kl(q, r)), std::exp(-scale * detail::kl(p, r))});
  }
  curve.push_back({0.0, 1.0});
  return curve;
}

// Trapezoidal area under the frontier after sorting by x (ties: larger y
// first, which follows the frontier's orientation).
inline double frontier_area(std::vector<FrontierPoint> curve) {
  std::stable_sort(curve.begin(), curve.end(), [](const FrontierPoint& a, const FrontierPoint& b) {
    return a.x < b.x || (a.x == b.x && a.y > b.y);
  });
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].x - curve[i - 1].x) * 0.5 * (curve[i].y + curve[i - 1].y);
  }
  return std::clamp(area, 0.0, 1.0);
}

inline double mauve_from_histograms(std::span<const double> p, std::span<const double> q,
                                    const MauveOptions& options = {}) {
  return frontier_area(
      divergence_frontier(p, q, options.scale, options.mixture_grid, options.smoothing));
}

// Projects pooled rows onto their leading principal components.
inline Eigen::MatrixXd pca_project(const Eigen::MatrixXd& points, std::size_t dims) {
  const Eigen::RowVectorXd mean = points.colwise().mean();
  const Eigen::MatrixXd centered = points.rowwise() - mean;
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(std::max<Eigen::Index>(1, points.rows() - 1));
  const double scale = 1.0 + mean.squaredNorm();
  if (!(cov.trace() > 1e-12 * scale)) {
    fail(ErrorKind::kNumerical,
         "Mauve: degenerate covariance, all pooled points are identical");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) {
    fail(ErrorKind::kNumerical, "Mauve: PCA eigendecomposition did not converge");
  }
  // Eigen returns eigenvalues in ascending order.
  const auto d = static_cast<Eigen::Index>(dims);
  const Eigen::MatrixXd basis = eig.eigenvectors().rightCols(d).rowwise().reverse();
  return centered * basis;
}

inline MetricValue mauve(const EmbeddingMatrix& x, const EmbeddingMatrix& y,
                         const MauveOptions& options, std::uint64_t seed = 0) {
  require_same_dim(x, y);
  const std::size_t pooled = x.n_rows() + y.n_rows();
  const std::size_t k = options.clusters.value_or(default_mauve_clusters(pooled));
  require(k >= 2, "Mauve needs at least 2 clusters");
  require(pooled >= k, "Mauve: " + std::to_string(pooled) + " samples are too few for " +
                           std::to_string(k) + " clusters");
  require(options.pca_dims >= 1, "Mauve needs pca_dims >= 1");
  require(options.scale > 0.0, "Mauve scale must be positive");
  const std::size_t dims = std::min(options.pca_dims, x.dim());

  Eigen::MatrixXd points(static_cast<Eigen::Index>(pooled), static_cast<Eigen::Index>(x.dim()));
  points.topRows(static_cast<Eigen::Index>(x.n_rows())) = to_eigen(x);
  points.bottomRows(static_cast<Eigen::Index>(y.n_rows())) = to_eigen(y);
  const Eigen::MatrixXd projected = pca_project(points, dims);

  const auto km = kmeans(projected, k, seed, options.kmeans);
  const auto p = label_histogram(km.labels, 0, x.n_rows(), k);
  const auto q = label_histogram(km.labels, x.n_rows(), pooled, k);
  return MetricValue::of(Metric::kMauve, mauve_from_histograms(p, q, options));
}

inline MetricValue mauve(const EmbeddingMatrix& x, const EmbeddingMatrix& y,
                         std::size_t clusters, std::size_t pca_dims, double scale_c,
                         std::uint64_t seed = 0) {
  require(pca_dims <= x.dim(), "Mauve: pca_dims exceeds embedding dimension");
  MauveOptions options;
  options.clusters = clusters;
  options.pca_dims = pca_dims;
  options.scale = scale_c;
  return mauve(x, y, options, seed);
}

}  // namespace kxops::metrics
