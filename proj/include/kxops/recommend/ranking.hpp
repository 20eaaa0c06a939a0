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
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "kxops/core/error.hpp"
#include "kxops/core/records.hpp"
#include "kxops/core/registry.hpp"
#include "kxops/recommend/sources.hpp"

namespace kxops::recommend {

using Weights = std::map<Metric, double>;

struct CandidateRow {
  std::string candidate_id;
  std::map<Metric, MetricValue> metric_values;
  // 1 = most similar; tied values share the mean of their ranks.
  std::map<Metric, double> metric_ranks;
  double weighted_rank_sum = 0.0;
  double rank_sum_ratio = 0.0;
};

struct DroppedCandidate {
  std::string candidate_id;
  std::string reason;
};

struct SimilarityReport {
  std::string target_dataset_id;
  std::vector<CandidateRow> rows;
  // Candidate ids, most similar first.
  std::vector<std::string> final_order;
  std::vector<DroppedCandidate> dropped;

  const CandidateRow& row(const std::string& candidate) const {
    for (const auto& r : rows) {
      if (r.candidate_id == candidate) return r;
    }
    fail(ErrorKind::kNotFound, "no report row for '" + candidate + "'");
  }
};

// Fractional ranks of `values`. Lower values rank first when
// `ascending`, higher values otherwise.
inline std::vector<double> fractional_ranks(const std::vector<double>& values, bool ascending) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ascending ? values[a] < values[b] : values[a] > values[b];
  });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j (0-based) share ranks i+1..j+1.
    const double mean_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

inline Weights uniform_weights(const std::vector<Metric>& metrics) {
  Weights w;
  for (Metric m : metrics) w[m] = 1.0;
  return w;
}

inline void validate_weights(const std::vector<Metric>& metrics, const Weights& weights) {
  require(!metrics.empty(), "at least one metric is required");
  double total = 0.0;
  for (Metric m : metrics) {
    auto it = weights.find(m);
    const double w = it == weights.end() ? 0.0 : it->second;
    require(w >= 0.0 && std::isfinite(w), "metric weights must be non-negative");
    total += w;
  }
  require(total > 0.0, "metric weights must not all be zero");
}

// Rank-sum ratio fusion over candidates whose metric values are already
// known. Every row must carry a value for every metric in `metrics`.
inline SimilarityReport fuse_ranks(const std::string& target, std::vector<CandidateRow> rows,
                                   const std::vector<Metric>& metrics, const Weights& weights) {
  validate_weights(metrics, weights);
  SimilarityReport report;
  report.target_dataset_id = target;
  if (rows.empty()) return report;

  for (Metric m : metrics) {
    std::vector<double> values;
    values.reserve(rows.size());
    for (const auto& r : rows) values.push_back(r.metric_values.at(m).value);
    const bool ascending = metrics::direction_of(m) == metrics::Direction::kDistance;
    const auto ranks = fractional_ranks(values, ascending);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].metric_ranks[m] = ranks[i];
  }

  double total = 0.0;
  for (auto& r : rows) {
    r.weighted_rank_sum = 0.0;
    for (Metric m : metrics) {
      auto it = weights.find(m);
      if (it != weights.end()) r.weighted_rank_sum += it->second * r.metric_ranks.at(m);
    }
    total += r.weighted_rank_sum;
  }
  for (auto& r : rows) r.rank_sum_ratio = r.weighted_rank_sum / total;

  const bool has_mmd = std::find(metrics.begin(), metrics.end(), Metric::kMmd) != metrics.end();
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = rows[a];
    const auto& rb = rows[b];
    if (ra.rank_sum_ratio != rb.rank_sum_ratio) return ra.rank_sum_ratio < rb.rank_sum_ratio;
    if (has_mmd) {
      const double ma = ra.metric_ranks.at(Metric::kMmd);
      const double mb = rb.metric_ranks.at(Metric::kMmd);
      if (ma != mb) return ma < mb;
    }
    return ra.candidate_id < rb.candidate_id;
  });
  for (std::size_t i : order) report.final_order.push_back(rows[i].candidate_id);
  report.rows = std::move(rows);
  return report;
}

// Evaluates every metric for every candidate against `target` and fuses the
// ranks. A candidate whose metric evaluation fails is dropped with a warning
// on `warnings`.
inline SimilarityReport rank_candidates(const std::string& target,
                                        const std::vector<std::string>& candidates,
                                        const std::vector<Metric>& metrics,
                                        const Weights& weights, const MetricSource& source,
                                        std::ostream* warnings = &std::cerr) {
  require(!candidates.empty(), "rank_candidates needs at least one candidate");
  validate_weights(metrics, weights);
  std::vector<CandidateRow> rows;
  std::vector<DroppedCandidate> dropped;
  for (const auto& c : candidates) {
    CandidateRow row;
    row.candidate_id = c;
    try {
      for (Metric m : metrics) row.metric_values[m] = source.value(m, target, c);
      rows.push_back(std::move(row));
    } catch (const Error& e) {
      dropped.push_back({c, e.what()});
      if (warnings) *warnings << "warning: dropping candidate " << c << ": " << e.what() << '\n';
    }
  }
  auto report = fuse_ranks(target, std::move(rows), metrics, weights);
  report.dropped = std::move(dropped);
  return report;
}

// Datasets sharing the target's task and domain, excluding the target.
inline std::vector<std::string> candidates_in_category(const Registry& registry,
                                                       const std::string& target) {
  const auto& t = registry.get<DatasetRecord>(target);
  std::vector<std::string> out;
  for (const auto& d : registry.list<DatasetRecord>()) {
    if (d.id != target && d.task == t.task && d.domain == t.domain) out.push_back(d.id);
  }
  return out;
}

// ---- JSON -------------------------------------------------------------------

inline json to_json_value(const MetricValue& v) {
  return json{{"metric", metrics::to_string(v.metric)},
              {"value", v.value},
              {"direction", metrics::to_string(v.direction)}};
}

inline json to_json_value(const SimilarityReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json values = json::object();
    json ranks = json::object();
    for (const auto& [m, v] : row.metric_values) values[std::string(metrics::to_string(m))] = to_json_value(v);
    for (const auto& [m, rank] : row.metric_ranks) ranks[std::string(metrics::to_string(m))] = rank;
    rows.push_back(json{{"candidate_dataset_id", row.candidate_id},
                        {"metric_values", values},
                        {"metric_ranks", ranks},
                        {"weighted_rank_sum", row.weighted_rank_sum},
                        {"rank_sum_ratio", row.rank_sum_ratio}});
  }
  json dropped = json::array();
  for (const auto& d : r.dropped) {
    dropped.push_back(json{{"candidate_dataset_id", d.candidate_id}, {"reason", d.reason}});
  }
  return json{{"target_dataset_id", r.target_dataset_id},
              {"rows", rows},
              {"final_order", r.final_order},
              {"dropped", dropped}};
}

}  // namespace kxops::recommend
