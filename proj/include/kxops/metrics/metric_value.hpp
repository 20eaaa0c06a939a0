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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "kxops/core/embedding.hpp"
#include "kxops/core/error.hpp"

namespace kxops::metrics {

enum class Metric { kMmd, kFbd, kPrF1, kMauve };

// DISTANCE: lower is more similar. SIMILARITY: higher is more similar.
enum class Direction { kDistance, kSimilarity };

inline constexpr Metric kAllMetrics[] = {Metric::kMmd, Metric::kFbd, Metric::kPrF1,
                                         Metric::kMauve};

inline std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::kMmd: return "mmd";
    case Metric::kFbd: return "fbd";
    case Metric::kPrF1: return "pr";
    case Metric::kMauve: return "mauve";
  }
  return "?";
}

inline Metric parse_metric(std::string_view s) {
  if (s == "mmd" || s == "MMD") return Metric::kMmd;
  if (s == "fbd" || s == "FBD" || s == "fd" || s == "FD") return Metric::kFbd;
  if (s == "pr" || s == "PR" || s == "pr_f1" || s == "PR_F1") return Metric::kPrF1;
  if (s == "mauve" || s == "MAUVE") return Metric::kMauve;
  fail(ErrorKind::kInvalidArgument, "unknown metric '" + std::string(s) + "'");
}

inline std::string_view to_string(Direction d) {
  return d == Direction::kDistance ? "DISTANCE" : "SIMILARITY";
}

inline Direction direction_of(Metric m) {
  return (m == Metric::kMmd || m == Metric::kFbd) ? Direction::kDistance
                                                  : Direction::kSimilarity;
}

struct MetricValue {
  Metric metric = Metric::kMmd;
  double value = 0.0;
  Direction direction = Direction::kDistance;

  static MetricValue of(Metric m, double v) { return {m, v, direction_of(m)}; }
};

// Gaussian kernel bandwidths; MMD is averaged across them.
struct KernelSpec {
  std::vector<double> bandwidths;

  void validate() const {
    require(!bandwidths.empty(), "kernel spec needs at least one bandwidth");
    for (double s : bandwidths) {
      require(s > 0.0 && std::isfinite(s), "kernel bandwidths must be positive");
    }
  }
};

// Rows of an embedding matrix as an n x d double matrix.
inline Eigen::MatrixXd to_eigen(const EmbeddingMatrix& m) {
  Eigen::MatrixXd out(m.n_rows(), m.dim());
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    for (std::size_t j = 0; j < m.dim(); ++j) out(i, j) = m(i, j);
  }
  return out;
}

inline void require_same_dim(const EmbeddingMatrix& x, const EmbeddingMatrix& y) {
  if (x.dim() != y.dim()) {
    fail(ErrorKind::kInvalidArgument, "dimension mismatch: " + std::to_string(x.dim()) +
                                          " vs " + std::to_string(y.dim()));
  }
}

}  // namespace kxops::metrics
