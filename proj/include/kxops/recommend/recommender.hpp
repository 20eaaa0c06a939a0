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

#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kxops/core/error.hpp"
#include "kxops/core/records.hpp"
#include "kxops/core/registry.hpp"
#include "kxops/recommend/ranking.hpp"
#include "kxops/recommend/sources.hpp"

namespace kxops::recommend {

// Historical experiments grouped by dataset.
class ExperimentIndex {
 public:
  ExperimentIndex() = default;

  static ExperimentIndex from_registry(const Registry& registry) {
    ExperimentIndex index;
    for (const auto& e : registry.list<ExperimentRecord>()) index.add(e);
    return index;
  }

  // One COMPLETED record per (dataset, model) in the fixture's results block.
  static ExperimentIndex from_fixture(const FixtureTable& fixture) {
    ExperimentIndex index;
    for (const auto& [dataset, models] : fixture.results()) {
      for (const auto& [model, scores] : models) {
        ExperimentRecord e;
        e.id = "fixture:" + dataset + ":" + model;
        e.dataset_id = dataset;
        e.model_id = model;
        e.status = ExperimentStatus::kCompleted;
        e.metrics = scores;
        index.add(std::move(e));
      }
    }
    return index;
  }

  void add(ExperimentRecord e) { by_dataset_[e.dataset_id].push_back(std::move(e)); }

  std::vector<const ExperimentRecord*> completed(const std::string& dataset) const {
    std::vector<const ExperimentRecord*> out;
    auto it = by_dataset_.find(dataset);
    if (it == by_dataset_.end()) return out;
    for (const auto& e : it->second) {
      if (e.status == ExperimentStatus::kCompleted && e.metrics) out.push_back(&e);
    }
    return out;
  }

  std::vector<std::string> datasets() const {
    std::vector<std::string> out;
    for (const auto& [d, _] : by_dataset_) out.push_back(d);
    return out;
  }

 private:
  std::map<std::string, std::vector<ExperimentRecord>> by_dataset_;
};

struct ModelChoice {
  std::string model_id;
  double value = 0.0;
  std::vector<std::string> experiment_ids;
};

// Best model on `dataset` by `metric` among COMPLETED experiments. Ties go to
// the lexicographically smallest model id.
inline std::optional<ModelChoice> best_model(const ExperimentIndex& index,
                                             const std::string& dataset, DesiredMetric metric) {
  const auto done = index.completed(dataset);
  if (done.empty()) return std::nullopt;
  ModelChoice best;
  bool have = false;
  for (const auto* e : done) {
    best.experiment_ids.push_back(e->id);
    const double v = e->metrics->get(metric);
    if (!have || v > best.value || (v == best.value && e->model_id < best.model_id)) {
      best.model_id = e->model_id;
      best.value = v;
      have = true;
    }
  }
  return best;
}

struct Recommendation {
  std::string target_dataset_id;
  std::string neighbor_dataset_id;
  DesiredMetric desired_metric = DesiredMetric::kF1;
  std::string model_id;
  double neighbor_metric_value = 0.0;
  std::vector<std::string> provenance;
  // Nearer candidates passed over for lack of completed experiments.
  std::vector<std::string> skipped_neighbors;
};

// Best model of the most similar candidate that has completed experiments.
inline Recommendation recommend(const std::string& target, DesiredMetric desired,
                                const SimilarityReport& report, const ExperimentIndex& index) {
  require(!report.final_order.empty(), "similarity report has no candidates");
  Recommendation rec;
  rec.target_dataset_id = target;
  rec.desired_metric = desired;
  for (const auto& neighbor : report.final_order) {
    if (auto choice = best_model(index, neighbor, desired)) {
      rec.neighbor_dataset_id = neighbor;
      rec.model_id = choice->model_id;
      rec.neighbor_metric_value = choice->value;
      rec.provenance = choice->experiment_ids;
      return rec;
    }
    rec.skipped_neighbors.push_back(neighbor);
  }
  fail(ErrorKind::kNotFound, "no recommendation for '" + target +
                                 "': no candidate has completed experiments");
}

struct AccuracyCase {
  std::string target;
  DesiredMetric desired = DesiredMetric::kF1;
  std::string neighbor;
  std::string recommended;
  std::string gold;
  bool hit = false;
};

struct AccuracyReport {
  std::map<DesiredMetric, std::size_t> hits;
  std::map<DesiredMetric, std::size_t> totals;
  std::size_t total_hits = 0;
  std::size_t total = 0;
  std::vector<AccuracyCase> cases;
  std::vector<std::string> excluded;

  double accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(total_hits) / static_cast<double>(total);
  }
  double accuracy(DesiredMetric m) const {
    auto t = totals.find(m);
    if (t == totals.end() || t->second == 0) return 0.0;
    return static_cast<double>(hits.at(m)) / static_cast<double>(t->second);
  }
};

// Leave-self-out evaluation: each dataset in turn is the target, all other
// datasets are candidates, and the recommended model is compared with the
// target's own best model per desired metric.
inline AccuracyReport evaluate_accuracy(const std::vector<std::string>& datasets,
                                        const ExperimentIndex& index,
                                        const MetricSource& source,
                                        const std::vector<Metric>& metric_set,
                                        const Weights& weights,
                                        const std::vector<DesiredMetric>& desired_metrics,
                                        std::ostream* warnings = &std::cerr) {
  require(!desired_metrics.empty(), "at least one desired metric is required");
  AccuracyReport out;
  for (const auto& target : datasets) {
    if (index.completed(target).empty()) {
      out.excluded.push_back(target);
      if (warnings) {
        *warnings << "warning: excluding " << target << ": no completed experiments\n";
      }
      continue;
    }
    std::vector<std::string> candidates;
    for (const auto& d : datasets) {
      if (d != target) candidates.push_back(d);
    }
    const auto report = rank_candidates(target, candidates, metric_set, weights, source, warnings);
    for (DesiredMetric m : desired_metrics) {
      const auto gold = best_model(index, target, m);
      const auto rec = recommend(target, m, report, index);
      AccuracyCase c{target, m, rec.neighbor_dataset_id, rec.model_id, gold->model_id,
                     rec.model_id == gold->model_id};
      out.hits[m] += c.hit ? 1 : 0;
      out.totals[m] += 1;
      out.total_hits += c.hit ? 1 : 0;
      out.total += 1;
      out.cases.push_back(std::move(c));
    }
  }
  return out;
}

// ---- JSON -------------------------------------------------------------------

inline json to_json_value(const Recommendation& r) {
  return json{{"target_dataset_id", r.target_dataset_id},
              {"neighbor_dataset_id", r.neighbor_dataset_id},
              {"desired_metric", to_string(r.desired_metric)},
              {"model_id", r.model_id},
              {"neighbor_metric_value", r.neighbor_metric_value},
              {"provenance", r.provenance},
              {"skipped_neighbors", r.skipped_neighbors}};
}

inline json to_json_value(const AccuracyReport& r) {
  json per_metric = json::object();
  for (const auto& [m, total] : r.totals) {
    per_metric[std::string(to_string(m))] =
        json{{"hits", r.hits.at(m)}, {"total", total}, {"accuracy", r.accuracy(m)}};
  }
  json cases = json::array();
  for (const auto& c : r.cases) {
    cases.push_back(json{{"target", c.target},
                         {"desired_metric", to_string(c.desired)},
                         {"neighbor", c.neighbor},
                         {"recommended", c.recommended},
                         {"gold", c.gold},
                         {"hit", c.hit}});
  }
  return json{{"hits", r.total_hits},
              {"total", r.total},
              {"accuracy", r.accuracy()},
              {"per_metric", per_metric},
              {"cases", cases},
              {"excluded", r.excluded}};
}

}  // namespace kxops::recommend
