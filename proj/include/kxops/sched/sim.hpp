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
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "kxops/core/error.hpp"
#include "kxops/core/random.hpp"
#include "kxops/sched/model.hpp"

namespace kxops::sched {

struct MachineSpec {
  std::string machine_id;
  std::uint32_t weight = 1;
  std::size_t workers = 1;
  std::vector<std::size_t> crashed_workers;
  bool down = false;  // forwarding to this machine fails
};

struct ClusterSpec {
  std::vector<MachineSpec> machines;

  void validate() const {
    require(!machines.empty(), "cluster has no machines", ErrorKind::kFormat);
    std::set<std::string> ids;
    for (const auto& m : machines) {
      require(!m.machine_id.empty(), "machine id must be non-empty", ErrorKind::kFormat);
      require(ids.insert(m.machine_id).second, "duplicate machine id " + m.machine_id,
              ErrorKind::kFormat);
      require(m.weight >= 1, "machine " + m.machine_id + ": weight must be >= 1", ErrorKind::kFormat);
      require(m.workers >= 1, "machine " + m.machine_id + ": needs a worker", ErrorKind::kFormat);
      for (auto w : m.crashed_workers) {
        require(w < m.workers, "machine " + m.machine_id + ": crashed worker out of range",
                ErrorKind::kFormat);
      }
    }
  }
};

struct TraceTask {
  std::string task_id;
  std::int64_t arrival = 0;
  std::int64_t duration = 0;
  bool fail = false;
  json config = json::object();
};

inline void to_json(json& j, const MachineSpec& m) {
  j = json{{"machine_id", m.machine_id}, {"weight", m.weight}, {"workers", m.workers}};
  if (!m.crashed_workers.empty()) j["crashed_workers"] = m.crashed_workers;
  if (m.down) j["down"] = true;
}
inline void from_json(const json& j, MachineSpec& m) {
  m.machine_id = j.at("machine_id").get<std::string>();
  m.weight = j.at("weight").get<std::uint32_t>();
  m.workers = j.value("workers", std::size_t{1});
  m.crashed_workers = j.value("crashed_workers", std::vector<std::size_t>{});
  m.down = j.value("down", false);
}
inline void to_json(json& j, const ClusterSpec& c) { j = json{{"machines", c.machines}}; }
inline void from_json(const json& j, ClusterSpec& c) {
  c.machines = j.at("machines").get<std::vector<MachineSpec>>();
}
inline void to_json(json& j, const TraceTask& t) {
  j = json{{"task_id", t.task_id}, {"arrival", t.arrival}, {"duration", t.duration}};
  if (t.fail) j["fail"] = true;
  if (!t.config.empty()) j["config"] = t.config;
}
inline void from_json(const json& j, TraceTask& t) {
  t.task_id = j.at("task_id").get<std::string>();
  t.arrival = j.value("arrival", std::int64_t{0});
  t.duration = j.at("duration").get<std::int64_t>();
  t.fail = j.value("fail", false);
  t.config = j.value("config", json::object());
}

inline void validate_trace(const std::vector<TraceTask>& trace) {
  std::set<std::string> ids;
  for (const auto& t : trace) {
    require(!t.task_id.empty(), "trace task id must be non-empty", ErrorKind::kFormat);
    require(ids.insert(t.task_id).second, "duplicate task id " + t.task_id, ErrorKind::kFormat);
    require(t.arrival >= 0, "task " + t.task_id + ": negative arrival", ErrorKind::kFormat);
    require(t.duration >= 0, "task " + t.task_id + ": negative duration", ErrorKind::kFormat);
  }
}

struct SimEvent {
  std::int64_t time = 0;
  std::string kind;  // submit assign unreachable enqueue skip start done failed
  std::string task_id;
  std::optional<std::string> machine_id;
  std::optional<std::size_t> worker;

  bool operator==(const SimEvent&) const = default;
};

inline void to_json(json& j, const SimEvent& e) {
  j = json{{"time", e.time}, {"kind", e.kind}, {"task_id", e.task_id}};
  if (e.machine_id) j["machine_id"] = *e.machine_id;
  if (e.worker) j["worker"] = *e.worker;
}

// Machine loads just before one selection, with the machine picked.
struct Selection {
  std::string task_id;
  std::vector<MachineState> before;
  std::string chosen;
};

using WorkerKey = std::pair<std::string, std::size_t>;

struct SimResult {
  std::vector<SimEvent> log;
  std::map<std::string, TaskEnvelope> tasks;
  std::map<WorkerKey, std::vector<std::string>> enqueue_order;
  std::map<WorkerKey, std::vector<std::string>> completion_order;
  std::vector<Selection> selections;
  std::vector<MachineState> machines;  // final loads
  std::size_t max_running_per_worker = 0;
  bool conservation_held = true;
};

// Discrete-event run of gateway -> server -> worker with virtual time. At
// equal times completions are handled before arrivals, and arrivals keep trace
// order. Identical inputs give identical results.
inline SimResult simulate(const ClusterSpec& cluster, const std::vector<TraceTask>& trace) {
  cluster.validate();
  validate_trace(trace);

  struct Worker {
    std::deque<std::string> queue;
    std::optional<std::string> running;
  };
  struct Machine {
    RoundRobin rotation;
    std::vector<Worker> workers;
    bool down;
  };

  SimResult res;
  std::map<std::string, Machine> machines;
  for (const auto& m : cluster.machines) {
    res.machines.push_back({m.machine_id, m.weight, 0, {}, true});
    Machine sm{RoundRobin(m.workers), std::vector<Worker>(m.workers), m.down};
    for (auto w : m.crashed_workers) sm.rotation.set_crashed(w, true);
    machines.emplace(m.machine_id, std::move(sm));
  }
  std::map<std::string, const TraceTask*> by_id;
  for (const auto& t : trace) by_id[t.task_id] = &t;

  // (time, phase, seq): phase 0 completion, 1 arrival.
  using Key = std::tuple<std::int64_t, int, std::uint64_t>;
  std::priority_queue<std::pair<Key, std::string>, std::vector<std::pair<Key, std::string>>,
                      std::greater<>>
      events;
  std::uint64_t seq = 0;
  for (const auto& t : trace) events.push({{t.arrival, 1, seq++}, t.task_id});

  auto log = [&](std::int64_t time, std::string kind, const std::string& task,
                 std::optional<std::string> machine = {}, std::optional<std::size_t> worker = {}) {
    res.log.push_back({time, std::move(kind), task, std::move(machine), worker});
  };
  auto machine_state = [&](const std::string& id) -> MachineState& {
    for (auto& m : res.machines) {
      if (m.machine_id == id) return m;
    }
    fail(ErrorKind::kNotFound, "unknown machine " + id);
  };
  auto start_next = [&](std::int64_t now, const std::string& mid, std::size_t w) {
    auto& worker = machines.at(mid).workers[w];
    if (worker.running || worker.queue.empty()) return;
    const std::string id = worker.queue.front();
    worker.queue.pop_front();
    worker.running = id;
    res.tasks.at(id).advance(TaskState::kRunning);
    log(now, "start", id, mid, w);
    events.push({{now + by_id.at(id)->duration, 0, seq++}, id});
  };
  auto check = [&] {
    std::uint64_t active = 0, live = 0;
    for (const auto& m : res.machines) active += m.active;
    for (const auto& [_, env] : res.tasks) live += in_flight(env.state) ? 1 : 0;
    if (active != live) res.conservation_held = false;
    for (const auto& [_, m] : machines) {
      for (const auto& w : m.workers) {
        res.max_running_per_worker = std::max<std::size_t>(res.max_running_per_worker, w.running ? 1 : 0);
      }
    }
  };

  while (!events.empty()) {
    const auto [key, id] = events.top();
    events.pop();
    const auto now = std::get<0>(key);
    const TraceTask& task = *by_id.at(id);

    if (std::get<1>(key) == 1) {
      TaskEnvelope env;
      env.task_id = id;
      env.config = task.config;
      env.submitted_at = now;
      res.tasks[id] = env;
      log(now, "submit", id);
      auto& e = res.tasks[id];
      std::set<std::string> tried;
      std::optional<std::string> target;
      // One forward plus at most one retry on the next-best machine.
      for (int attempt = 0; attempt < 2 && !target; ++attempt) {
        Selection sel{id, res.machines, {}};
        std::string mid;
        try {
          mid = select_machine(res.machines, tried);
        } catch (const Error&) {
          break;
        }
        sel.chosen = mid;
        res.selections.push_back(std::move(sel));
        if (!e.machine_id) e.advance(TaskState::kAssigned);
        e.machine_id = mid;
        log(now, "assign", id, mid);
        if (machines.at(mid).down) {
          --machine_state(mid).active;
          tried.insert(mid);
          log(now, "unreachable", id, mid);
          continue;
        }
        target = mid;
      }
      if (!target) {
        e.error = "no reachable machine";
        e.advance(TaskState::kFailed);
        log(now, "failed", id, e.machine_id);
        check();
        continue;
      }
      auto& m = machines.at(*target);
      std::vector<std::size_t> skipped;
      std::size_t w;
      try {
        w = m.rotation.next(&skipped);
      } catch (const Error& err) {
        for (auto s : skipped) log(now, "skip", id, *target, s);
        --machine_state(*target).active;
        e.error = err.what();
        e.advance(TaskState::kFailed);
        log(now, "failed", id, *target);
        check();
        continue;
      }
      for (auto s : skipped) log(now, "skip", id, *target, s);
      e.worker = w;
      e.advance(TaskState::kQueuedAtWorker);
      m.workers[w].queue.push_back(id);
      res.enqueue_order[{*target, w}].push_back(id);
      log(now, "enqueue", id, *target, w);
      start_next(now, *target, w);
    } else {
      auto& e = res.tasks.at(id);
      const std::string mid = *e.machine_id;
      const std::size_t w = *e.worker;
      machines.at(mid).workers[w].running.reset();
      --machine_state(mid).active;
      if (task.fail) {
        e.error = "task failed";
        e.advance(TaskState::kFailed);
        log(now, "failed", id, mid, w);
      } else {
        e.advance(TaskState::kDone);
        log(now, "done", id, mid, w);
      }
      res.completion_order[{mid, w}].push_back(id);
      start_next(now, mid, w);
    }
    check();
  }
  return res;
}

// Small random clusters and traces for property checks.
inline ClusterSpec random_cluster(Rng& rng, std::size_t max_machines = 4, std::uint32_t max_weight = 4,
                                  std::size_t max_workers = 3, bool allow_crashes = true) {
  ClusterSpec c;
  const std::size_t n = 1 + rng.below(max_machines);
  for (std::size_t i = 0; i < n; ++i) {
    MachineSpec m;
    m.machine_id = "m" + std::to_string(i);
    m.weight = 1 + static_cast<std::uint32_t>(rng.below(max_weight));
    m.workers = 1 + rng.below(max_workers);
    if (allow_crashes && m.workers > 1 && rng.below(4) == 0) m.crashed_workers.push_back(rng.below(m.workers));
    c.machines.push_back(std::move(m));
  }
  return c;
}

inline std::vector<TraceTask> random_trace(Rng& rng, std::size_t n, std::int64_t max_arrival = 20,
                                           std::int64_t min_duration = 0, std::int64_t max_duration = 10) {
  std::vector<TraceTask> trace;
  for (std::size_t i = 0; i < n; ++i) {
    TraceTask t;
    t.task_id = "t" + std::to_string(i);
    t.arrival = max_arrival > 0 ? static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(max_arrival) + 1)) : 0;
    t.duration = min_duration + static_cast<std::int64_t>(
                                    rng.below(static_cast<std::uint64_t>(max_duration - min_duration) + 1));
    t.fail = rng.below(8) == 0;
    trace.push_back(std::move(t));
  }
  return trace;
}

}  // namespace kxops::sched
