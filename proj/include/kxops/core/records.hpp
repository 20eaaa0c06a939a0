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

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "kxops/core/error.hpp"

namespace kxops {

using json = nlohmann::json;

// UTC milliseconds since the Unix epoch.
using TimestampMs = std::int64_t;

inline TimestampMs now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

enum class Task { kNer, kRe, kJoint };

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::kNer: return "NER";
    case Task::kRe: return "RE";
    case Task::kJoint: return "JOINT";
  }
  return "?";
}

inline Task parse_task(std::string_view s) {
  if (s == "NER" || s == "ner") return Task::kNer;
  if (s == "RE" || s == "re") return Task::kRe;
  if (s == "JOINT" || s == "joint") return Task::kJoint;
  fail(ErrorKind::kInvalidArgument, "unknown task '" + std::string(s) + "'");
}

enum class ExperimentStatus { kCreated, kQueued, kRunning, kCompleted, kFailed };

inline std::string_view to_string(ExperimentStatus s) {
  switch (s) {
    case ExperimentStatus::kCreated: return "CREATED";
    case ExperimentStatus::kQueued: return "QUEUED";
    case ExperimentStatus::kRunning: return "RUNNING";
    case ExperimentStatus::kCompleted: return "COMPLETED";
    case ExperimentStatus::kFailed: return "FAILED";
  }
  return "?";
}

inline ExperimentStatus parse_status(std::string_view s) {
  if (s == "CREATED") return ExperimentStatus::kCreated;
  if (s == "QUEUED") return ExperimentStatus::kQueued;
  if (s == "RUNNING") return ExperimentStatus::kRunning;
  if (s == "COMPLETED") return ExperimentStatus::kCompleted;
  if (s == "FAILED") return ExperimentStatus::kFailed;
  fail(ErrorKind::kFormat, "unknown experiment status '" + std::string(s) + "'");
}

// CREATED -> QUEUED -> RUNNING -> {COMPLETED, FAILED}. Nothing else.
inline bool can_transition(ExperimentStatus from, ExperimentStatus to) {
  using S = ExperimentStatus;
  switch (from) {
    case S::kCreated: return to == S::kQueued;
    case S::kQueued: return to == S::kRunning;
    case S::kRunning: return to == S::kCompleted || to == S::kFailed;
    case S::kCompleted:
    case S::kFailed: return false;
  }
  return false;
}

enum class DesiredMetric { kPrecision, kRecall, kF1 };

inline std::string_view to_string(DesiredMetric m) {
  switch (m) {
    case DesiredMetric::kPrecision: return "precision";
    case DesiredMetric::kRecall: return "recall";
    case DesiredMetric::kF1: return "f1";
  }
  return "?";
}

inline DesiredMetric parse_desired_metric(std::string_view s) {
  if (s == "precision" || s == "p" || s == "P") return DesiredMetric::kPrecision;
  if (s == "recall" || s == "r" || s == "R") return DesiredMetric::kRecall;
  if (s == "f1" || s == "f" || s == "F" || s == "F1") return DesiredMetric::kF1;
  fail(ErrorKind::kInvalidArgument, "unknown desired metric '" + std::string(s) + "'");
}

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  double get(DesiredMetric m) const {
    switch (m) {
      case DesiredMetric::kPrecision: return precision;
      case DesiredMetric::kRecall: return recall;
      case DesiredMetric::kF1: return f1;
    }
    return 0.0;
  }

  friend bool operator==(const Scores&, const Scores&) = default;
};

struct DatasetRecord {
  std::string id;
  std::string name;
  Task task = Task::kNer;
  std::string domain;
  std::optional<std::string> embedding_ref;
  std::optional<std::string> corpus_ref;
  // Name of the registered retrieval callback that reads corpus_ref.
  std::optional<std::string> retrieval;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct ModelRecord {
  std::string id;
  std::string name;
  Task task = Task::kNer;
  std::string version;
  // Name of the registered feature extractor feeding this model.
  std::optional<std::string> extractor;

  friend bool operator==(const ModelRecord&, const ModelRecord&) = default;
};

using Scalar = std::variant<bool, std::int64_t, double, std::string>;
using Hyperparams = std::map<std::string, Scalar>;

struct ExperimentRecord {
  std::string id;
  std::string dataset_id;
  std::string model_id;
  Hyperparams hyperparams;
  ExperimentStatus status = ExperimentStatus::kCreated;
  std::optional<Scores> metrics;
  TimestampMs created_at = 0;
  std::optional<TimestampMs> finished_at;
  std::optional<std::string> assigned_machine;
  std::optional<std::string> assigned_worker;

  std::vector<Scores> history;
  std::optional<std::string> artifact_path;
  std::optional<std::string> error;
  // call site -> "custom" | "default"
  std::map<std::string, std::string> hooks;

  void transition(ExperimentStatus to) {
    if (!can_transition(status, to)) {
      fail(ErrorKind::kInvalidArgument,
           "experiment " + id + ": illegal transition " +
               std::string(to_string(status)) + " -> " +
               std::string(to_string(to)));
    }
    status = to;
  }

  void complete(const Scores& final_scores, TimestampMs at) {
    transition(ExperimentStatus::kCompleted);
    metrics = final_scores;
    finished_at = at;
  }

  void mark_failed(std::string message, TimestampMs at) {
    transition(ExperimentStatus::kFailed);
    metrics.reset();
    error = std::move(message);
    finished_at = at;
  }

  void validate() const {
    require(!id.empty(), "experiment id must be non-empty");
    const bool completed = status == ExperimentStatus::kCompleted;
    require(metrics.has_value() == completed,
            "experiment " + id + ": metrics must be present iff COMPLETED");
    if (metrics) {
      for (double v : {metrics->precision, metrics->recall, metrics->f1}) {
        require(v >= 0.0 && v <= 1.0, "experiment " + id + ": metric outside [0,1]");
      }
    }
  }

  friend bool operator==(const ExperimentRecord&, const ExperimentRecord&) = default;
};

// ---- JSON mapping -------------------------------------------------------

inline void to_json(json& j, const Scores& s) {
  j = json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

inline void from_json(const json& j, Scores& s) {
  s.precision = j.at("precision").get<double>();
  s.recall = j.at("recall").get<double>();
  s.f1 = j.at("f1").get<double>();
}

inline json scalar_to_json(const Scalar& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

inline Scalar scalar_from_json(const json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  fail(ErrorKind::kFormat, "hyperparameter values must be scalars, got " + j.dump());
}

namespace detail {

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <typename T>
void get_optional(const json& j, const char* key, std::optional<T>& v) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    v = it->get<T>();
  } else {
    v.reset();
  }
}

}  // namespace detail

inline void to_json(json& j, const DatasetRecord& r) {
  j = json{{"id", r.id}, {"name", r.name}, {"task", to_string(r.task)}, {"domain", r.domain}};
  detail::put_optional(j, "embedding_ref", r.embedding_ref);
  detail::put_optional(j, "corpus_ref", r.corpus_ref);
  detail::put_optional(j, "retrieval", r.retrieval);
}

inline void from_json(const json& j, DatasetRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.name = j.value("name", r.id);
  r.task = parse_task(j.at("task").get<std::string>());
  r.domain = j.value("domain", std::string{});
  detail::get_optional(j, "embedding_ref", r.embedding_ref);
  detail::get_optional(j, "corpus_ref", r.corpus_ref);
  detail::get_optional(j, "retrieval", r.retrieval);
}

inline void to_json(json& j, const ModelRecord& r) {
  j = json{{"id", r.id}, {"name", r.name}, {"task", to_string(r.task)}, {"version", r.version}};
  detail::put_optional(j, "extractor", r.extractor);
}

inline void from_json(const json& j, ModelRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.name = j.value("name", r.id);
  r.task = parse_task(j.at("task").get<std::string>());
  r.version = j.value("version", std::string{});
  detail::get_optional(j, "extractor", r.extractor);
}

inline void to_json(json& j, const ExperimentRecord& r) {
  json hp = json::object();
  for (const auto& [k, v] : r.hyperparams) hp[k] = scalar_to_json(v);
  j = json{{"id", r.id},
           {"dataset_id", r.dataset_id},
           {"model_id", r.model_id},
           {"hyperparams", hp},
           {"status", to_string(r.status)},
           {"created_at", r.created_at},
           {"history", r.history},
           {"hooks", r.hooks}};
  detail::put_optional(j, "metrics", r.metrics);
  detail::put_optional(j, "finished_at", r.finished_at);
  detail::put_optional(j, "assigned_machine", r.assigned_machine);
  detail::put_optional(j, "assigned_worker", r.assigned_worker);
  detail::put_optional(j, "artifact_path", r.artifact_path);
  detail::put_optional(j, "error", r.error);
}

inline void from_json(const json& j, ExperimentRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.dataset_id = j.at("dataset_id").get<std::string>();
  r.model_id = j.at("model_id").get<std::string>();
  r.hyperparams.clear();
  if (auto it = j.find("hyperparams"); it != j.end()) {
    for (const auto& [k, v] : it->items()) r.hyperparams[k] = scalar_from_json(v);
  }
  r.status = parse_status(j.at("status").get<std::string>());
  r.created_at = j.value("created_at", TimestampMs{0});
  r.history = j.value("history", std::vector<Scores>{});
  r.hooks = j.value("hooks", std::map<std::string, std::string>{});
  detail::get_optional(j, "metrics", r.metrics);
  detail::get_optional(j, "finished_at", r.finished_at);
  detail::get_optional(j, "assigned_machine", r.assigned_machine);
  detail::get_optional(j, "assigned_worker", r.assigned_worker);
  detail::get_optional(j, "artifact_path", r.artifact_path);
  detail::get_optional(j, "error", r.error);
}

}  // namespace kxops
