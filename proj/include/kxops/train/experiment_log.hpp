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
#include <string>
#include <vector>

#include "kxops/core/error.hpp"
#include "kxops/core/records.hpp"

namespace kxops::train {

struct LogEvent {
  TimestampMs timestamp = 0;
  std::string experiment_id;
  std::string event;
  json payload;
};

inline void to_json(json& j, const LogEvent& e) {
  j = json{{"timestamp", e.timestamp},
           {"experiment_id", e.experiment_id},
           {"event", e.event},
           {"payload", e.payload}};
}
inline void from_json(const json& j, LogEvent& e) {
  e.timestamp = j.at("timestamp").get<TimestampMs>();
  e.experiment_id = j.at("experiment_id").get<std::string>();
  e.event = j.at("event").get<std::string>();
  e.payload = j.value("payload", json::object());
}

// Append-only JSON lines; each append is flushed before returning.
class ExperimentLog {
 public:
  ExperimentLog(std::filesystem::path path, std::string experiment_id)
      : path_(std::move(path)), experiment_id_(std::move(experiment_id)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  }

  const std::filesystem::path& path() const noexcept { return path_; }

  void append(const std::string& event, json payload = json::object()) {
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) fail(ErrorKind::kIo, "cannot append to " + path_.string());
    out << json(LogEvent{now_ms(), experiment_id_, event, std::move(payload)}).dump() << '\n';
    out.flush();
    if (!out) fail(ErrorKind::kIo, "write failed for " + path_.string());
  }

  static std::vector<LogEvent> read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
    std::vector<LogEvent> events;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) events.push_back(json::parse(line).get<LogEvent>());
    }
    return events;
  }

 private:
  std::filesystem::path path_;
  std::string experiment_id_;
};

}  // namespace kxops::train
