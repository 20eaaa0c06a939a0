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
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "kxops/core/embedding.hpp"
#include "kxops/core/random.hpp"
#include "kxops/metrics/frechet.hpp"
#include "kxops/metrics/mauve.hpp"
#include "kxops/metrics/metric_value.hpp"
#include "kxops/metrics/mmd.hpp"
#include "kxops/metrics/prd.hpp"

namespace kxops::metrics {

struct SamplingPlan {
  std::size_t sample_size = 1000;
  std::size_t repeats = 10;
  std::uint64_t seed = 0;

  void validate() const {
    require(sample_size >= 2, "sampling plan needs sample_size >= 2");
    require(repeats >= 1, "sampling plan needs repeats >= 1");
  }
};

// Everything the four metrics can be tuned with.
struct MetricConfig {
  // Fixed MMD bandwidths; when unset, the median heuristic is applied to
  // each evaluated pair.
  std::optional<KernelSpec> kernel;
  std::vector<double> bandwidth_multipliers = default_bandwidth_multipliers();
  PrOptions pr;
  MauveOptions mauve;
};

inline MetricValue compute_metric(Metric metric, const EmbeddingMatrix& x,
                                  const EmbeddingMatrix& y, const MetricConfig& config,
                                  std::uint64_t seed) {
  switch (metric) {
    case Metric::kMmd: {
      const KernelSpec kernel =
          config.kernel ? *config.kernel
                        : median_heuristic_bandwidths(x, y, config.bandwidth_multipliers, seed);
      return mmd_squared(x, y, kernel);
    }
    case Metric::kFbd:
      return frechet_distance(x, y);
    case Metric::kPrF1:
      return pr_f1(x, y, config.pr, seed);
    case Metric::kMauve:
      return mauve(x, y, config.mauve, seed);
  }
  fail(ErrorKind::kInvalidArgument, "unknown metric");
}

namespace detail {

inline EmbeddingMatrix subsample(const EmbeddingMatrix& m, std::size_t size, Rng rng) {
  if (m.n_rows() <= size) return m;
  auto rows = rng.sample_without_replacement(m.n_rows(), size);
  std::sort(rows.begin(), rows.end());
  return m.select_rows(rows);
}

}  // namespace detail

// Averages `op(x_sub, y_sub, seed_r)` over plan.repeats draws of
// plan.sample_size rows (without replacement) from each matrix. Each repeat
// gets its own random streams derived from plan.seed. A matrix with no more
// rows than sample_size is used whole.
template <typename MetricOp>
MetricValue subsampled_metric(MetricOp&& op, const EmbeddingMatrix& x, const EmbeddingMatrix& y,
                              const SamplingPlan& plan) {
  plan.validate();
  double sum = 0.0;
  std::optional<MetricValue> last;
  for (std::size_t r = 0; r < plan.repeats; ++r) {
    const EmbeddingMatrix xs = detail::subsample(x, plan.sample_size, Rng::split(plan.seed, 3 * r));
    const EmbeddingMatrix ys =
        detail::subsample(y, plan.sample_size, Rng::split(plan.seed, 3 * r + 1));
    const std::uint64_t metric_seed = Rng::split(plan.seed, 3 * r + 2).next();
    last = op(xs, ys, metric_seed);
    sum += last->value;
  }
  MetricValue out = *last;
  out.value = sum / static_cast<double>(plan.repeats);
  return out;
}

inline MetricValue subsampled_metric(Metric metric, const EmbeddingMatrix& x,
                                     const EmbeddingMatrix& y, const SamplingPlan& plan,
                                     const MetricConfig& config = {}) {
  return subsampled_metric(
      [&](const EmbeddingMatrix& a, const EmbeddingMatrix& b, std::uint64_t seed) {
        return compute_metric(metric, a, b, config, seed);
      },
      x, y, plan);
}

}  // namespace kxops::metrics
