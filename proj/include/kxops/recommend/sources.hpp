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

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kxops/core/embedding.hpp"
#include "kxops/core/error.hpp"
#include "kxops/core/records.hpp"
#include "kxops/core/registry.hpp"
#include "kxops/metrics/similarity.hpp"

namespace kxops::recommend {

using metrics::Metric;
using metrics::MetricValue;

// Where pairwise dataset metric values come from.
class MetricSource {
 public:
  virtual ~MetricSource() = default;
  virtual MetricValue value(Metric metric, const std::string& target,
                            const std::string& candidate) const = 0;
};

// Precomputed pairwise tables, JSON shape:
//   { "<metric>": { "<dataset>": { "<dataset>": value, ... }, ... }, ... }
// An optional "results" key carries per-dataset model scores:
//   { "results": { "<dataset>": { "<model>": {precision, recall, f1} } } }
class FixtureTable final : public MetricSource {
 public:
  using PairTable = std::map<std::string, std::map<std::string, double>>;
  using Results = std::map<std::string, std::map<std::string, Scores>>;

  static FixtureTable from_json(const json& j) {
    require(j.is_object(), "fixture must be a JSON object", ErrorKind::kFormat);
    FixtureTable t;
    for (const auto& [key, value] : j.items()) {
      if (key == "results") {
        t.results_ = value.get<Results>();
        continue;
      }
      Metric m;
      try {
        m = metrics::parse_metric(key);
      } catch (const Error&) {
        fail(ErrorKind::kFormat, "fixture: unknown metric key '" + key + "'");
      }
      try {
        t.tables_[m] = value.get<PairTable>();
      } catch (const json::exception& e) {
        fail(ErrorKind::kFormat, "fixture: table '" + key + "': " + e.what());
      }
    }
    return t;
  }

  static FixtureTable load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::kIo, "cannot open fixture " + path.string());
    try {
      return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
      fail(ErrorKind::kFormat, "fixture " + path.string() + ": " + e.what());
    }
  }

  void set(Metric m, const std::string& a, const std::string& b, double v) {
    tables_[m][a][b] = v;
  }

  bool has_metric(Metric m) const { return tables_.contains(m); }

  // Looks up (target, candidate), falling back to (candidate, target).
  MetricValue value(Metric metric, const std::string& target,
                    const std::string& candidate) const override {
    auto t = tables_.find(metric);
    if (t == tables_.end()) {
      fail(ErrorKind::kNotFound,
           "fixture has no table for metric " + std::string(metrics::to_string(metric)));
    }
    if (auto v = lookup(t->second, target, candidate)) return MetricValue::of(metric, *v);
    if (auto v = lookup(t->second, candidate, target)) return MetricValue::of(metric, *v);
    fail(ErrorKind::kNotFound, "fixture has no " + std::string(metrics::to_string(metric)) +
                                   " value for (" + target + ", " + candidate + ")");
  }

  // Every dataset id mentioned by any table or the results block.
  std::set<std::string> datasets() const {
    std::set<std::string> out;
    for (const auto& [m, table] : tables_) {
      for (const auto& [a, row] : table) {
        out.insert(a);
        for (const auto& [b, v] : row) out.insert(b);
      }
    }
    for (const auto& [d, r] : results_) out.insert(d);
    return out;
  }

  const Results& results() const noexcept { return results_; }

 private:
  static std::optional<double> lookup(const PairTable& table, const std::string& a,
                                      const std::string& b) {
    auto row = table.find(a);
    if (row == table.end()) return std::nullopt;
    auto cell = row->second.find(b);
    if (cell == row->second.end()) return std::nullopt;
    return cell->second;
  }

  std::map<Metric, PairTable> tables_;
  Results results_;
};

// Live metric computation from the registry's embedding files.
class ComputedMetrics final : public MetricSource {
 public:
  ComputedMetrics(const Registry& registry, metrics::SamplingPlan plan,
                  metrics::MetricConfig config = {})
      : registry_(registry), plan_(plan), config_(std::move(config)) {
    plan_.validate();
  }

  MetricValue value(Metric metric, const std::string& target,
                    const std::string& candidate) const override {
    const auto& x = embedding(target);
    const auto& y = embedding(candidate);
    return metrics::subsampled_metric(metric, x, y, plan_, config_);
  }

  const EmbeddingMatrix& embedding(const std::string& dataset_id) const {
    if (auto it = cache_.find(dataset_id); it != cache_.end()) return *it->second;
    const auto& record = registry_.get<DatasetRecord>(dataset_id);
    if (!record.embedding_ref) {
      fail(ErrorKind::kNotFound, "dataset '" + dataset_id + "' has no embedding");
    }
    std::filesystem::path path = *record.embedding_ref;
    if (path.is_relative()) path = registry_.root() / path;
    auto m = std::make_shared<EmbeddingMatrix>(read_embedding(path));
    return *cache_.emplace(dataset_id, std::move(m)).first->second;
  }

 private:
  const Registry& registry_;
  metrics::SamplingPlan plan_;
  metrics::MetricConfig config_;
  mutable std::map<std::string, std::shared_ptr<const EmbeddingMatrix>> cache_;
};

}  // namespace kxops::recommend
