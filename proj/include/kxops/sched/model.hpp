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
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kxops/core/error.hpp"
#include "kxops/core/records.hpp"

namespace kxops::sched {

enum class TaskState { kSubmitted, kAssigned, kQueuedAtWorker, kRunning, kDone, kFailed };

inline std::string_view to_string(TaskState s) {
  switch (s) {
    case TaskState::kSubmitted: return "SUBMITTED";
    case TaskState::kAssigned: return "ASSIGNED";
    case TaskState::kQueuedAtWorker: return "QUEUED_AT_WORKER";
    case TaskState::kRunning: return "RUNNING";
    case TaskState::kDone: return "DONE";
    case TaskState::kFailed: return "FAILED";
  }
  return "?";
}

inline TaskState parse_task_state(std::string_view s) {
  for (auto t : {TaskState::kSubmitted, TaskState::kAssigned, TaskState::kQueuedAtWorker,
                 TaskState::kRunning, TaskState::kDone, TaskState::kFailed}) {
    if (to_string(t) == s) return t;
  }
  fail(ErrorKind::kFormat, "unknown task state '" + std::string(s) + "'");
}

inline bool is_terminal(TaskState s) { return s == TaskState::kDone || s == TaskState::kFailed; }

// States only move forward; FAILED is reachable from any live state.
inline bool can_advance(TaskState from, TaskState to) {
  if (is_terminal(from)) return false;
  if (to == TaskState::kFailed) return true;
  return static_cast<int>(to) == static_cast<int>(from) + 1;
}

inline bool in_flight(TaskState s) {
  return s == TaskState::kAssigned || s == TaskState::kQueuedAtWorker || s == TaskState::kRunning;
}

struct TaskEnvelope {
  std::string task_id;
  json config = json::object();
  std::int64_t submitted_at = 0;
  TaskState state = TaskState::kSubmitted;
  std::optional<std::string> machine_id;
  std::optional<std::size_t> worker;
  std::optional<std::string> error;
  std::optional<json> result;  // experiment record once finished

  void advance(TaskState to) {
    if (!can_advance(state, to)) {
      fail(ErrorKind::kInvalidArgument, "task " + task_id + ": illegal transition " +
                                            std::string(to_string(state)) + " -> " +
                                            std::string(to_string(to)));
    }
    state = to;
  }

  bool operator==(const TaskEnvelope&) const = default;
};

inline void to_json(json& j, const TaskEnvelope& t) {
  j = json{{"task_id", t.task_id},
           {"config", t.config},
           {"submitted_at", t.submitted_at},
           {"state", to_string(t.state)}};
  if (t.machine_id) j["machine_id"] = *t.machine_id;
  if (t.worker) j["worker"] = *t.worker;
  if (t.error) j["error"] = *t.error;
  if (t.result) j["result"] = *t.result;
}

inline void from_json(const json& j, TaskEnvelope& t) {
  t.task_id = j.at("task_id").get<std::string>();
  t.config = j.value("config", json::object());
  t.submitted_at = j.value("submitted_at", std::int64_t{0});
  t.state = parse_task_state(j.at("state").get<std::string>());
  t.machine_id.reset();
  t.worker.reset();
  t.error.reset();
  t.result.reset();
  if (j.contains("machine_id")) t.machine_id = j.at("machine_id").get<std::string>();
  if (j.contains("worker")) t.worker = j.at("worker").get<std::size_t>();
  if (j.contains("error")) t.error = j.at("error").get<std::string>();
  if (j.contains("result")) t.result = j.at("result");
}

struct MachineState {
  std::string machine_id;
  std::uint32_t weight = 1;  // GPU count
  std::uint32_t active = 0;  // in-flight tasks
  std::string address;       // host:port, networked mode only
  bool reachable = true;
};

inline void to_json(json& j, const MachineState& m) {
  j = json{{"machine_id", m.machine_id}, {"weight", m.weight}, {"active", m.active}};
  if (!m.address.empty()) j["address"] = m.address;
}

inline void from_json(const json& j, MachineState& m) {
  m.machine_id = j.at("machine_id").get<std::string>();
  m.weight = j.at("weight").get<std::uint32_t>();
  m.active = j.value("active", 0u);
  m.address = j.value("address", std::string{});
  m.reachable = true;
  require(m.weight >= 1, "machine " + m.machine_id + ": weight must be >= 1");
}

// Index of the reachable machine minimising active / weight, ties to the
// lowest id. Ratios are compared by cross-multiplication so they are exact.
inline std::size_t least_loaded(const std::vector<MachineState>& machines,
                                const std::set<std::string>& exclude = {}) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < machines.size(); ++i) {
    const auto& m = machines[i];
    if (!m.reachable || exclude.count(m.machine_id)) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = machines[*best];
    const std::uint64_t lhs = std::uint64_t{m.active} * b.weight;
    const std::uint64_t rhs = std::uint64_t{b.active} * m.weight;
    if (lhs < rhs || (lhs == rhs && m.machine_id < b.machine_id)) best = i;
  }
  if (!best) fail(ErrorKind::kUnavailable, "no reachable machine");
  return *best;
}

// Weighted least connections. The chosen machine's count goes up by one.
inline std::string select_machine(std::vector<MachineState>& machines,
                                  const std::set<std::string>& exclude = {}) {
  require(!machines.empty(), "select_machine: no machines");
  auto& m = machines[least_loaded(machines, exclude)];
  ++m.active;
  return m.machine_id;
}

// Per-machine dispatcher: strict rotation over worker indices, skipping
// crashed workers. Queue depth plays no part.
class RoundRobin {
 public:
  explicit RoundRobin(std::size_t workers) : crashed_(workers, false) {
    require(workers >= 1, "a machine needs at least one worker");
  }

  std::size_t size() const noexcept { return crashed_.size(); }
  void set_crashed(std::size_t w, bool crashed) { crashed_.at(w) = crashed; }
  bool crashed(std::size_t w) const { return crashed_.at(w); }

  // Next live worker; skipped indices are appended to `skipped`.
  std::size_t next(std::vector<std::size_t>* skipped = nullptr) {
    for (std::size_t tries = 0; tries < crashed_.size(); ++tries) {
      const std::size_t w = cursor_;
      cursor_ = (cursor_ + 1) % crashed_.size();
      if (!crashed_[w]) return w;
      if (skipped) skipped->push_back(w);
    }
    fail(ErrorKind::kUnavailable, "all workers have crashed");
  }

 private:
  std::vector<bool> crashed_;
  std::size_t cursor_ = 0;
};

}  // namespace kxops::sched
