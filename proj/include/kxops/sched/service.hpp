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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "kxops/core/error.hpp"
#include "kxops/sched/model.hpp"
#include "kxops/sched/net.hpp"

// Networked mode. Message types (each carries msg_id; replies echo it):
//   submit_task{task_id, config}        -> task_ack{task_id, worker?} | error
//   status_query{task_id}               -> status_reply{envelope} | error
//   result_query{task_id}               -> result_report{task_id, experiment_record} | error
//   heartbeat{machine_id, active, weight} -> heartbeat (AI server's view)
// AI servers push status_reply with msg_id 0 when a task starts running and
// result_report with a fresh msg_id when it finishes.
namespace kxops::sched {

namespace msg {

inline json error_reply(std::int64_t msg_id, const Error& e) {
  return {{"type", "error"}, {"msg_id", msg_id}, {"kind", to_string(e.kind())}, {"error", e.what()}};
}

inline ErrorKind kind_from(const std::string& s) {
  for (auto k : {ErrorKind::kInvalidArgument, ErrorKind::kNotFound, ErrorKind::kAlreadyExists,
                 ErrorKind::kIo, ErrorKind::kFormat, ErrorKind::kNumerical, ErrorKind::kUnavailable}) {
    if (to_string(k) == s) return k;
  }
  return ErrorKind::kUnavailable;
}

[[noreturn]] inline void rethrow(const json& reply) {
  fail(kind_from(reply.value("kind", std::string{})), reply.value("error", std::string("remote error")));
}

}  // namespace msg

struct ExecOutcome {
  bool ok = true;
  json record = nullptr;
  std::string error;
};

// Runs one task on a worker. Exceptions count as failures.
using Executor = std::function<ExecOutcome(const TaskEnvelope&, std::size_t worker)>;

struct AiServerOptions {
  std::string machine_id = "m0";
  std::size_t workers = 1;
  std::vector<std::size_t> crashed_workers;
  net::Endpoint listen;
  Executor executor;
};

// Per-machine server: round-robin dispatch onto FIFO worker queues, one
// thread per worker, each running at most one task at a time.
class AiServer {
 public:
  explicit AiServer(AiServerOptions options)
      : options_(std::move(options)), rotation_(options_.workers), queues_(options_.workers) {
    require(static_cast<bool>(options_.executor), "AI server needs an executor");
    for (auto w : options_.crashed_workers) rotation_.set_crashed(w, true);
  }
  ~AiServer() { stop(); }
  AiServer(const AiServer&) = delete;
  AiServer& operator=(const AiServer&) = delete;

  void start() {
    listener_ = net::listen_on(options_.listen);
    port_ = net::bound_port(listener_);
    for (std::size_t w = 0; w < options_.workers; ++w) {
      if (!rotation_.crashed(w)) threads_.emplace_back([this, w] { worker_loop(w); });
    }
    threads_.emplace_back([this] { accept_loop(); });
  }

  std::uint16_t port() const noexcept { return port_; }
  net::Endpoint endpoint() const { return {options_.listen.host, port_}; }

  void stop() {
    if (stopping_.exchange(true)) return;
    listener_.shutdown();
    {
      std::lock_guard lock(mu_);
      for (auto& c : channels_) c->shutdown();
    }
    cv_.notify_all();
    for (auto& t : threads_) {
      if (t.joinable()) t.join();
    }
  }

  // Blocks until stop() is called from elsewhere.
  void wait() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return stopping_.load(); });
  }

 private:
  struct Item {
    TaskEnvelope envelope;
    std::shared_ptr<net::Channel> reply_to;
  };

  void accept_loop() {
    while (!stopping_) {
      auto sock = net::accept_one(listener_);
      if (!sock) {
        if (stopping_) return;
        continue;
      }
      auto ch = std::make_shared<net::Channel>(std::move(*sock));
      std::lock_guard lock(mu_);
      if (stopping_) return;
      channels_.push_back(ch);
      threads_.emplace_back([this, ch] { serve(ch); });
    }
  }

  void serve(std::shared_ptr<net::Channel> ch) {
    for (;;) {
      std::optional<json> m;
      try {
        m = ch->receive();
      } catch (const Error&) {
        return;
      }
      if (!m) return;
      const auto id = m->value("msg_id", std::int64_t{0});
      try {
        const auto type = m->at("type").get<std::string>();
        if (type == "submit_task") {
          enqueue(*m, ch);
        } else if (type == "heartbeat") {
          ch->send({{"type", "heartbeat"}, {"msg_id", id}, {"machine_id", options_.machine_id},
                    {"active", active_.load()}, {"weight", options_.workers}});
        } else {
          fail(ErrorKind::kInvalidArgument, "AI server cannot handle '" + type + "'");
        }
      } catch (const Error& e) {
        ch->send(msg::error_reply(id, e));
      } catch (const json::exception& e) {
        ch->send(msg::error_reply(id, Error(ErrorKind::kFormat, e.what())));
      }
    }
  }

  void enqueue(const json& m, const std::shared_ptr<net::Channel>& ch) {
    TaskEnvelope env;
    env.task_id = m.at("task_id").get<std::string>();
    env.config = m.value("config", json::object());
    env.state = TaskState::kAssigned;
    env.machine_id = options_.machine_id;
    std::lock_guard lock(mu_);
    std::vector<std::size_t> skipped;
    const std::size_t w = rotation_.next(&skipped);
    env.worker = w;
    env.advance(TaskState::kQueuedAtWorker);
    // The ack goes out before the worker can see the task, so the gateway
    // never hears about a start ahead of the ack.
    ch->send({{"type", "task_ack"}, {"msg_id", m.value("msg_id", std::int64_t{0})},
              {"task_id", env.task_id}, {"worker", w}, {"skipped", skipped}});
    ++active_;
    queues_[w].push_back({std::move(env), ch});
    cv_.notify_all();
  }

  void worker_loop(std::size_t w) {
    for (;;) {
      Item item;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stopping_ || !queues_[w].empty(); });
        if (stopping_) return;
        item = std::move(queues_[w].front());
        queues_[w].pop_front();
      }
      auto& env = item.envelope;
      env.advance(TaskState::kRunning);
      send_quietly(*item.reply_to, {{"type", "status_reply"}, {"msg_id", 0}, {"envelope", env}});
      ExecOutcome out;
      try {
        out = options_.executor(env, w);
      } catch (const std::exception& e) {
        out = {false, nullptr, e.what()};
      }
      --active_;
      json report = {{"type", "result_report"},
                     {"msg_id", next_msg_id_++},
                     {"task_id", env.task_id},
                     {"machine_id", options_.machine_id},
                     {"worker", w},
                     {"state", to_string(out.ok ? TaskState::kDone : TaskState::kFailed)},
                     {"experiment_record", out.record}};
      if (!out.ok) report["error"] = out.error;
      send_quietly(*item.reply_to, report);
    }
  }

  static void send_quietly(net::Channel& ch, const json& m) {
    try {
      ch.send(m);
    } catch (const Error&) {
      // Gateway went away; the task outcome is lost with it.
    }
  }

  AiServerOptions options_;
  RoundRobin rotation_;
  std::vector<std::deque<Item>> queues_;
  net::Socket listener_;
  std::uint16_t port_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::shared_ptr<net::Channel>> channels_;
  std::vector<std::thread> threads_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::int64_t> active_{0};
  std::atomic<std::int64_t> next_msg_id_{1};
};

struct GatewayOptions {
  std::vector<MachineState> machines;  // address = host:port of each AI server
  net::Endpoint listen;
  std::chrono::milliseconds reply_timeout{10000};
};

inline std::vector<MachineState> load_machines(const json& j) {
  const auto& arr = j.is_object() ? j.at("machines") : j;
  auto machines = arr.get<std::vector<MachineState>>();
  require(!machines.empty(), "machines file lists no machines", ErrorKind::kFormat);
  std::set<std::string> ids;
  for (const auto& m : machines) {
    require(ids.insert(m.machine_id).second, "duplicate machine id " + m.machine_id, ErrorKind::kFormat);
  }
  return machines;
}

// Service gateway: weighted least connections over AI servers, tracks every
// task envelope, and serves submit/status/result to clients.
class Gateway {
 public:
  explicit Gateway(GatewayOptions options) : options_(std::move(options)) {
    require(!options_.machines.empty(), "gateway needs at least one machine");
    for (auto& m : options_.machines) m.active = 0;
  }
  ~Gateway() { stop(); }
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  void start() {
    listener_ = net::listen_on(options_.listen);
    port_ = net::bound_port(listener_);
    threads_.emplace_back([this] { accept_loop(); });
  }

  std::uint16_t port() const noexcept { return port_; }
  net::Endpoint endpoint() const { return {options_.listen.host, port_}; }

  void stop() {
    if (stopping_.exchange(true)) return;
    listener_.shutdown();
    {
      std::lock_guard lock(mu_);
      for (auto& [_, link] : links_) link->channel->shutdown();
      for (auto& c : clients_) c->shutdown();
    }
    cv_.notify_all();
    for (auto& t : threads_) {
      if (t.joinable()) t.join();
    }
  }

  void wait() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return stopping_.load(); });
  }

  // Selects a machine and forwards; an unreachable machine gets one retry on
  // the next-best machine before the task is FAILED.
  std::string submit(const json& config, std::optional<std::string> task_id = std::nullopt) {
    std::lock_guard submit_lock(submit_mu_);
    std::string id;
    {
      std::lock_guard lock(mu_);
      id = task_id.value_or(next_task_id());
      require(!id.empty(), "task id must be non-empty");
      if (tasks_.count(id)) fail(ErrorKind::kAlreadyExists, "duplicate task id " + id);
      TaskEnvelope env;
      env.task_id = id;
      env.config = config;
      env.submitted_at = now_ms();
      tasks_.emplace(id, std::move(env));
      order_.push_back(id);
    }
    std::set<std::string> tried;
    std::string last_error = "no reachable machine";
    for (int attempt = 0; attempt < 2; ++attempt) {
      std::string mid;
      {
        std::lock_guard lock(mu_);
        try {
          mid = select_machine(options_.machines, tried);
        } catch (const Error& e) {
          last_error = e.what();
          break;
        }
        auto& env = tasks_.at(id);
        if (env.state == TaskState::kSubmitted) env.advance(TaskState::kAssigned);
        env.machine_id = mid;
      }
      try {
        forward(mid, id, config);
        return id;
      } catch (const Error& e) {
        last_error = e.what();
        std::lock_guard lock(mu_);
        --machine(mid).active;
        tried.insert(mid);
      }
    }
    std::lock_guard lock(mu_);
    auto& env = tasks_.at(id);
    env.error = last_error;
    env.advance(TaskState::kFailed);
    cv_.notify_all();
    return id;
  }

  TaskEnvelope status(const std::string& task_id) const {
    std::lock_guard lock(mu_);
    auto it = tasks_.find(task_id);
    if (it == tasks_.end()) fail(ErrorKind::kNotFound, "unknown task id '" + task_id + "'");
    return it->second;
  }

  json result(const std::string& task_id) const {
    const auto env = status(task_id);
    if (!is_terminal(env.state)) {
      fail(ErrorKind::kUnavailable, "task " + task_id + " is " + std::string(to_string(env.state)));
    }
    return env.result.value_or(json(nullptr));
  }

  std::vector<MachineState> machines() const {
    std::lock_guard lock(mu_);
    return options_.machines;
  }

  std::vector<TaskEnvelope> tasks() const {
    std::lock_guard lock(mu_);
    std::vector<TaskEnvelope> out;
    for (const auto& id : order_) out.push_back(tasks_.at(id));
    return out;
  }

  // Completion order per (machine, worker) as reported.
  std::map<std::pair<std::string, std::size_t>, std::vector<std::string>> completion_order() const {
    std::lock_guard lock(mu_);
    return completions_;
  }

  bool wait_all_terminal(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] {
      for (const auto& [_, env] : tasks_) {
        if (!is_terminal(env.state)) return false;
      }
      return true;
    });
  }

 private:
  struct Link {
    std::shared_ptr<net::Channel> channel;
    std::map<std::int64_t, std::promise<json>> pending;
    bool alive = true;
  };

  MachineState& machine(const std::string& id) {
    for (auto& m : options_.machines) {
      if (m.machine_id == id) return m;
    }
    fail(ErrorKind::kNotFound, "unknown machine " + id);
  }

  std::string next_task_id() {
    for (;;) {
      const std::string id = "task-" + std::to_string(++task_counter_);
      if (!tasks_.count(id)) return id;
    }
  }

  // Caller holds submit_mu_, not mu_.
  std::shared_ptr<Link> link_for(const std::string& mid) {
    {
      std::lock_guard lock(mu_);
      auto it = links_.find(mid);
      if (it != links_.end() && it->second->alive) return it->second;
    }
    std::string address;
    {
      std::lock_guard lock(mu_);
      address = machine(mid).address;
    }
    if (address.empty()) fail(ErrorKind::kUnavailable, "machine " + mid + " has no address");
    auto link = std::make_shared<Link>();
    link->channel = std::make_shared<net::Channel>(net::connect_to(net::parse_endpoint(address)));
    {
      std::lock_guard lock(mu_);
      if (stopping_) fail(ErrorKind::kUnavailable, "gateway stopping");
      links_[mid] = link;
      threads_.emplace_back([this, mid, link] { read_link(mid, link); });
    }
    return link;
  }

  json request(const std::shared_ptr<Link>& link, json m) {
    std::future<json> reply;
    std::int64_t id;
    {
      std::lock_guard lock(mu_);
      if (!link->alive) fail(ErrorKind::kUnavailable, "connection lost");
      id = next_msg_id_++;
      reply = link->pending[id].get_future();
    }
    m["msg_id"] = id;
    link->channel->send(m);
    if (reply.wait_for(options_.reply_timeout) != std::future_status::ready) {
      std::lock_guard lock(mu_);
      link->pending.erase(id);
      fail(ErrorKind::kUnavailable, "timed out waiting for reply");
    }
    auto r = reply.get();
    if (r.value("type", std::string{}) == "error") msg::rethrow(r);
    return r;
  }

  void forward(const std::string& mid, const std::string& task_id, const json& config) {
    auto link = link_for(mid);
    request(link, {{"type", "submit_task"}, {"task_id", task_id}, {"config", config}});
  }

  // Applies AI server messages in stream order; replies also wake the waiting
  // request.
  void read_link(const std::string& mid, std::shared_ptr<Link> link) {
    for (;;) {
      std::optional<json> m;
      try {
        m = link->channel->receive();
      } catch (const Error&) {
        m.reset();
      }
      std::lock_guard lock(mu_);
      if (!m) {
        link->alive = false;
        for (auto& [_, p] : link->pending) {
          p.set_value({{"type", "error"}, {"kind", "unavailable"}, {"error", "connection lost"}});
        }
        link->pending.clear();
        lose_machine(mid);
        cv_.notify_all();
        return;
      }
      const auto type = m->value("type", std::string{});
      const auto id = m->value("msg_id", std::int64_t{0});
      try {
        if (type == "task_ack") {
          auto& env = tasks_.at(m->at("task_id").get<std::string>());
          env.worker = m->at("worker").get<std::size_t>();
          env.advance(TaskState::kQueuedAtWorker);
        } else if (type == "status_reply" && id == 0) {
          const auto update = m->at("envelope").get<TaskEnvelope>();
          auto& env = tasks_.at(update.task_id);
          if (update.state == TaskState::kRunning) env.advance(TaskState::kRunning);
        } else if (type == "result_report") {
          auto& env = tasks_.at(m->at("task_id").get<std::string>());
          const auto state = parse_task_state(m->at("state").get<std::string>());
          if (env.state == TaskState::kQueuedAtWorker) env.advance(TaskState::kRunning);
          env.advance(state);
          if (m->contains("error")) env.error = m->at("error").get<std::string>();
          if (!m->at("experiment_record").is_null()) env.result = m->at("experiment_record");
          --machine(mid).active;
          completions_[{mid, m->at("worker").get<std::size_t>()}].push_back(env.task_id);
          cv_.notify_all();
          continue;
        }
      } catch (const std::exception&) {
        // A message about a task this gateway does not track; ignore it.
      }
      if (id != 0) {
        auto it = link->pending.find(id);
        if (it != link->pending.end()) {
          it->second.set_value(*m);
          link->pending.erase(it);
        }
      }
    }
  }

  // Caller holds mu_.
  void lose_machine(const std::string& mid) {
    auto& m = machine(mid);
    m.reachable = false;
    for (auto& [_, env] : tasks_) {
      if (env.machine_id == mid && (env.state == TaskState::kQueuedAtWorker || env.state == TaskState::kRunning)) {
        env.error = "lost connection to machine " + mid;
        env.advance(TaskState::kFailed);
        if (m.active > 0) --m.active;
      }
    }
  }

  void accept_loop() {
    while (!stopping_) {
      auto sock = net::accept_one(listener_);
      if (!sock) {
        if (stopping_) return;
        continue;
      }
      auto ch = std::make_shared<net::Channel>(std::move(*sock));
      std::lock_guard lock(mu_);
      if (stopping_) return;
      clients_.push_back(ch);
      threads_.emplace_back([this, ch] { serve_client(ch); });
    }
  }

  void serve_client(std::shared_ptr<net::Channel> ch) {
    for (;;) {
      std::optional<json> m;
      try {
        m = ch->receive();
      } catch (const Error&) {
        return;
      }
      if (!m) return;
      const auto id = m->value("msg_id", std::int64_t{0});
      try {
        const auto type = m->at("type").get<std::string>();
        if (type == "submit_task") {
          std::optional<std::string> tid;
          if (m->contains("task_id") && !m->at("task_id").is_null()) tid = m->at("task_id").get<std::string>();
          const auto assigned = submit(m->value("config", json::object()), tid);
          ch->send({{"type", "task_ack"}, {"msg_id", id}, {"task_id", assigned}});
        } else if (type == "status_query") {
          ch->send({{"type", "status_reply"}, {"msg_id", id},
                    {"envelope", status(m->at("task_id").get<std::string>())}});
        } else if (type == "result_query") {
          const auto tid = m->at("task_id").get<std::string>();
          ch->send({{"type", "result_report"}, {"msg_id", id}, {"task_id", tid},
                    {"experiment_record", result(tid)}});
        } else if (type == "heartbeat") {
          ch->send({{"type", "heartbeat"}, {"msg_id", id}, {"machines", machines()}});
        } else {
          fail(ErrorKind::kInvalidArgument, "gateway cannot handle '" + type + "'");
        }
      } catch (const Error& e) {
        ch->send(msg::error_reply(id, e));
      } catch (const json::exception& e) {
        ch->send(msg::error_reply(id, Error(ErrorKind::kFormat, e.what())));
      }
    }
  }

  GatewayOptions options_;
  net::Socket listener_;
  std::uint16_t port_ = 0;
  mutable std::mutex mu_;
  std::mutex submit_mu_;
  std::condition_variable cv_;
  std::map<std::string, std::shared_ptr<Link>> links_;
  std::vector<std::shared_ptr<net::Channel>> clients_;
  std::map<std::string, TaskEnvelope> tasks_;
  std::vector<std::string> order_;
  std::map<std::pair<std::string, std::size_t>, std::vector<std::string>> completions_;
  std::vector<std::thread> threads_;
  std::atomic<bool> stopping_{false};
  std::int64_t next_msg_id_ = 1;
  std::uint64_t task_counter_ = 0;
};

// Synchronous client for the gateway protocol.
class GatewayClient {
 public:
  explicit GatewayClient(const net::Endpoint& ep) : ch_(net::connect_to(ep)) {}

  json call(json m) {
    m["msg_id"] = ++msg_id_;
    ch_.send(m);
    for (;;) {
      auto r = ch_.receive();
      if (!r) fail(ErrorKind::kUnavailable, "gateway closed the connection");
      if (r->value("msg_id", std::int64_t{0}) != msg_id_) continue;
      if (r->value("type", std::string{}) == "error") msg::rethrow(*r);
      return *r;
    }
  }

  std::string submit(const json& config, std::optional<std::string> task_id = std::nullopt) {
    json m = {{"type", "submit_task"}, {"config", config}};
    if (task_id) m["task_id"] = *task_id;
    return call(m).at("task_id").get<std::string>();
  }

  TaskEnvelope status(const std::string& task_id) {
    return call({{"type", "status_query"}, {"task_id", task_id}}).at("envelope").get<TaskEnvelope>();
  }

  json result(const std::string& task_id) {
    return call({{"type", "result_query"}, {"task_id", task_id}}).at("experiment_record");
  }

 private:
  net::Channel ch_;
  std::int64_t msg_id_ = 0;
};

}  // namespace kxops::sched
