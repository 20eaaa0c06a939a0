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
#include <vector>

#include <Eigen/Dense>

#include "kxops/core/embedding.hpp"
#include "kxops/core/random.hpp"
#include "kxops/metrics/metric_value.hpp"

namespace kxops::metrics {

inline const std::vector<double>& default_bandwidth_multipliers() {
  static const std::vector<double> kMultipliers = {0.25, 0.5, 1.0, 2.0, 4.0};
  return kMultipliers;
}

// Median heuristic: sigma0 is the median pairwise Euclidean distance over the
// pooled rows of x and y (at most `pool_cap` rows, drawn with `seed`). Returns
// sigma0 * m for every multiplier. A zero median falls back to sigma0 = 1.
inline KernelSpec median_heuristic_bandwidths(const EmbeddingMatrix& x, const EmbeddingMatrix& y,
                                              const std::vector<double>& multipliers,
                                              std::uint64_t seed = 0,
                                              std::size_t pool_cap = 1000) {
  require_same_dim(x, y);
  require(!multipliers.empty(), "need at least one bandwidth multiplier");
  const std::size_t pooled = x.n_rows() + y.n_rows();
  require(pooled >= 2, "median heuristic needs at least two points");

  std::vector<std::size_t> pick;
  if (pooled > pool_cap) {
    Rng rng(seed);
    pick = rng.sample_without_replacement(pooled, pool_cap);
    std::sort(pick.begin(), pick.end());
  } else {
    pick.resize(pooled);
    for (std::size_t i = 0; i < pooled; ++i) pick[i] = i;
  }
  auto row_of = [&](std::size_t k) {
    return k < x.n_rows() ? x.row(k) : y.row(k - x.n_rows());
  };

  std::vector<double> dists;
  dists.reserve(pick.size() * (pick.size() - 1) / 2);
  for (std::size_t a = 0; a < pick.size(); ++a) {
    auto ra = row_of(pick[a]);
    for (std::size_t b = a + 1; b < pick.size(); ++b) {
      auto rb = row_of(pick[b]);
      double s = 0.0;
      for (std::size_t j = 0; j < ra.size(); ++j) {
        const double d = static_cast<double>(ra[j]) - rb[j];
        s += d * d;
      }
      dists.push_back(std::sqrt(s));
    }
  }

  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  double median = dists[mid];
  if (dists.size() % 2 == 0) {
    const double lower = *std::max_element(dists.begin(), dists.begin() + mid);
    median = 0.5 * (lower + median);
  }
  if (!(median > 0.0)) median = 1.0;

  KernelSpec spec;
  for (double m : multipliers) spec.bandwidths.push_back(median * m);
  spec.validate();
  return spec;
}

namespace detail {

// Pairwise squared Euclidean distances between the rows of a and b.
inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd d = -2.0 * (a * b.transpose());
  d.colwise() += na;
  d.rowwise() += nb.transpose();
  return d.cwiseMax(0.0);
}

inline double mean_kernel(const Eigen::MatrixXd& sq, double sigma) {
  const double scale = -1.0 / (2.0 * sigma * sigma);
  return (sq.array() * scale).exp().mean();
}

}  // namespace detail

// Biased (V-statistic) estimate of MMD^2 with a Gaussian kernel, averaged over
// the kernel's bandwidths. Tiny negative float residue is clamped to zero.
inline MetricValue mmd_squared(const EmbeddingMatrix& x, const EmbeddingMatrix& y,
                               const KernelSpec& kernel) {
  require_same_dim(x, y);
  kernel.validate();

  Eigen::MatrixXd ex = to_eigen(x);
  Eigen::MatrixXd ey = to_eigen(y);
  // Center on the pooled mean; Gram-form distances lose precision far from
  // the origin.
  const Eigen::RowVectorXd center =
      (ex.colwise().sum() + ey.colwise().sum()) / static_cast<double>(ex.rows() + ey.rows());
  ex.rowwise() -= center;
  ey.rowwise() -= center;

  const Eigen::MatrixXd dxx = detail::squared_distances(ex, ex);
  const Eigen::MatrixXd dyy = detail::squared_distances(ey, ey);
  const Eigen::MatrixXd dxy = detail::squared_distances(ex, ey);

  double total = 0.0;
  for (double sigma : kernel.bandwidths) {
    const double kxx = detail::mean_kernel(dxx, sigma);
    const double kyy = detail::mean_kernel(dyy, sigma);
    const double kxy = detail::mean_kernel(dxy, sigma);
    total += kxx - 2.0 * kxy + kyy;
  }
  const double value = total / static_cast<double>(kernel.bandwidths.size());
  return MetricValue::of(Metric::kMmd, std::max(0.0, value));
}

}  // namespace kxops::metrics
