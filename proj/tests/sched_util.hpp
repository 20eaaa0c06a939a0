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
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "kxops/sched/model.hpp"
#include "kxops/sched/service.hpp"
#include "kxops/sched/sim.hpp"

namespace kxops::testing {

using namespace kxops::sched;

// Weighted least connections by floating ratio, smallest id on ties.
inline std::string brute_force_choice(const std::vector<MachineState>& machines) {
  std::string best;
  double best_ratio = 0.0;
  for (const auto& m : machines) {
    if (!m.reachable) continue;
    const double r = static_cast<double>(m.active) / m.weight;
    if (best.empty() || r < best_ratio - 1e-12 || (std::abs(r - best_ratio) <= 1e-12 && m.machine_id < best)) {
      best = m.machine_id;
      best_ratio = r;
    }
  }
  return best;
}

// Holds every task until opened, so all submissions land before any
// completion, as in a simulation where everything arrives at t = 0.
struct Gate {
  std::mutex mu;
  std::condition_variable cv;
  bool open = false;

  void release() {
    {
      std::lock_guard lock(mu);
      open = true;
    }
    cv.notify_all();
  }
  ExecOutcome run(const TaskEnvelope& env) {
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return open; });
    if (env.config.value("fail", false)) return {false, nullptr, "task failed"};
    return {true, {{"id", env.task_id}}, {}};
  }
};

inline std::uint16_t closed_port() {
  auto s = net::listen_on({"127.0.0.1", 0});
  return net::bound_port(s);
}

struct Loopback {
  std::vector<std::unique_ptr<AiServer>> servers;
  std::unique_ptr<Gateway> gateway;

  Loopback(const ClusterSpec& cluster, Gate& gate) {
    GatewayOptions go;
    for (const auto& m : cluster.machines) {
      MachineState st{m.machine_id, m.weight, 0, {}, true};
      if (m.down) {
        st.address = "127.0.0.1:" + std::to_string(closed_port());
      } else {
        AiServerOptions so;
        so.machine_id = m.machine_id;
        so.workers = m.workers;
        so.crashed_workers = m.crashed_workers;
        so.listen = {"127.0.0.1", 0};
        so.executor = [&gate](const TaskEnvelope& env, std::size_t) { return gate.run(env); };
        servers.push_back(std::make_unique<AiServer>(so));
        servers.back()->start();
        st.address = servers.back()->endpoint().str();
      }
      go.machines.push_back(st);
    }
    go.listen = {"127.0.0.1", 0};
    gateway = std::make_unique<Gateway>(go);
    gateway->start();
  }
  ~Loopback() {
    gateway->stop();
    for (auto& s : servers) s->stop();
  }
};

}  // namespace kxops::testing
