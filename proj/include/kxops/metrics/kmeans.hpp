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

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "kxops/core/error.hpp"
#include "kxops/core/random.hpp"

namespace kxops::metrics {

struct KMeansOptions {
  std::size_t max_iterations = 100;
  // Stop once inertia improves by less than this fraction of its previous
  // value.
  double relative_tolerance = 1e-4;
};

struct KMeansResult {
  Eigen::MatrixXd centroids;  // k x d
  std::vector<std::size_t> labels;
  double inertia = 0.0;
  std::size_t iterations = 0;
};

namespace detail {

// Nearest centroid per row; ties go to the lowest centroid index.
inline double assign_nearest(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                             std::vector<std::size_t>& labels) {
  const Eigen::VectorXd pn = points.rowwise().squaredNorm();
  const Eigen::VectorXd cn = centroids.rowwise().squaredNorm();
  const Eigen::MatrixXd cross = points * centroids.transpose();
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = cn[c] - 2.0 * cross(i, c);
      if (d < best_d) {
        best_d = d;
        best = static_cast<std::size_t>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
    inertia += std::max(0.0, best_d + pn[i]);
  }
  return inertia;
}

}  // namespace detail

// Lloyd's algorithm with seeded k-means++ initialization.
inline KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed,
                           const KMeansOptions& options = {}) {
  const auto n = static_cast<std::size_t>(points.rows());
  require(k >= 1, "k-means needs k >= 1");
  require(n >= k, "k-means needs at least " + std::to_string(k) + " points, got " +
                      std::to_string(n));
  Rng rng(seed);

  KMeansResult result;
  result.centroids.resize(static_cast<Eigen::Index>(k), points.cols());
  result.labels.assign(n, 0);

  // k-means++ seeding.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.below(n);
  result.centroids.row(0) = points.row(static_cast<Eigen::Index>(first));
  for (std::size_t c = 1; c < k; ++c) {
    const auto prev = result.centroids.row(static_cast<Eigen::Index>(c - 1));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(static_cast<Eigen::Index>(i)) - prev).squaredNorm());
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(n);
    }
    result.centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
  }

  double prev_inertia = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    result.inertia = detail::assign_nearest(points, result.centroids, result.labels);
    result.iterations = it + 1;
    if (result.inertia == 0.0 ||
        (std::isfinite(prev_inertia) &&
         prev_inertia - result.inertia <= options.relative_tolerance * prev_inertia)) {
      break;
    }
    prev_inertia = result.inertia;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(result.centroids.rows(), points.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(result.labels[i])) += points.row(static_cast<Eigen::Index>(i));
      ++counts[result.labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      // An empty cell keeps its previous centroid.
      if (counts[c] > 0) {
        result.centroids.row(static_cast<Eigen::Index>(c)) =
            sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
      }
    }
  }
  return result;
}

// Normalized cell-frequency histogram of labels[begin, end).
inline std::vector<double> label_histogram(const std::vector<std::size_t>& labels,
                                           std::size_t begin, std::size_t end, std::size_t k) {
  std::vector<double> h(k, 0.0);
  for (std::size_t i = begin; i < end; ++i) h[labels[i]] += 1.0;
  const double total = static_cast<double>(end - begin);
  for (double& v : h) v /= total;
  return h;
}

}  // namespace kxops::metrics
