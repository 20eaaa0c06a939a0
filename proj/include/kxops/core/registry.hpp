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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "kxops/core/error.hpp"
#include "kxops/core/records.hpp"

namespace kxops {

template <typename Record>
struct RecordTraits;

template <>
struct RecordTraits<DatasetRecord> {
  static constexpr const char* kFile = "datasets.jsonl";
  static constexpr const char* kKind = "dataset";
  static void validate(const DatasetRecord& r) {
    require(!r.id.empty(), "dataset id must be non-empty");
  }
};

template <>
struct RecordTraits<ModelRecord> {
  static constexpr const char* kFile = "models.jsonl";
  static constexpr const char* kKind = "model";
  static void validate(const ModelRecord& r) {
    require(!r.id.empty(), "model id must be non-empty");
  }
};

template <>
struct RecordTraits<ExperimentRecord> {
  static constexpr const char* kFile = "experiments.jsonl";
  static constexpr const char* kKind = "experiment";
  static void validate(const ExperimentRecord& r) { r.validate(); }
};

inline constexpr const char* kRegistryRootEnv = "KXOPS_REGISTRY_ROOT";

// Registry root from an explicit flag, else $KXOPS_REGISTRY_ROOT, else
// ./registry.
inline std::filesystem::path resolve_registry_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kRegistryRootEnv); env && *env) return env;
  return "registry";
}

// Durable store for datasets, models and experiments. One JSONL document per
// record kind under `root`, one record per line. Single writer: the owning
// process serializes writes; other processes may read.
class Registry {
 public:
  explicit Registry(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) fail(ErrorKind::kIo, "cannot create registry root " + root_.string() + ": " + ec.message());
    load(datasets_);
    load(models_);
    load(experiments_);
  }

  const std::filesystem::path& root() const noexcept { return root_; }

  // Insert a new record. Fails if the id is already present.
  template <typename Record>
  void put(const Record& r) {
    RecordTraits<Record>::validate(r);
    auto& table = table_for<Record>();
    if (table.contains(r.id)) {
      fail(ErrorKind::kAlreadyExists, std::string("duplicate ") +
                                          RecordTraits<Record>::kKind + " id '" + r.id + "'");
    }
    table.emplace(r.id, r);
    append_line(path_for<Record>(), json(r).dump());
  }

  // Replace an existing record.
  template <typename Record>
  void update(const Record& r) {
    RecordTraits<Record>::validate(r);
    auto& table = table_for<Record>();
    auto it = table.find(r.id);
    if (it == table.end()) {
      fail(ErrorKind::kNotFound, std::string("unknown ") + RecordTraits<Record>::kKind +
                                     " id '" + r.id + "'");
    }
    it->second = r;
    rewrite(table);
  }

  template <typename Record>
  void upsert(const Record& r) {
    if (contains<Record>(r.id)) {
      update(r);
    } else {
      put(r);
    }
  }

  template <typename Record>
  bool contains(const std::string& id) const {
    return table_for<Record>().contains(id);
  }

  template <typename Record>
  const Record& get(const std::string& id) const {
    const auto& table = table_for<Record>();
    auto it = table.find(id);
    if (it == table.end()) {
      fail(ErrorKind::kNotFound, std::string("unknown ") + RecordTraits<Record>::kKind +
                                     " id '" + id + "'");
    }
    return it->second;
  }

  // All records of one kind, sorted by id.
  template <typename Record>
  std::vector<Record> list() const {
    std::vector<Record> out;
    for (const auto& [id, r] : table_for<Record>()) out.push_back(r);
    return out;
  }

  DatasetRecord dataset(const std::string& id) const { return get<DatasetRecord>(id); }
  ModelRecord model(const std::string& id) const { return get<ModelRecord>(id); }
  ExperimentRecord experiment(const std::string& id) const { return get<ExperimentRecord>(id); }

  std::vector<ExperimentRecord> experiments_for_dataset(const std::string& dataset_id) const {
    std::vector<ExperimentRecord> out;
    for (const auto& [id, r] : experiments_) {
      if (r.dataset_id == dataset_id) out.push_back(r);
    }
    return out;
  }

 private:
  template <typename Record>
  std::map<std::string, Record>& table_for() {
    return const_cast<std::map<std::string, Record>&>(
        static_cast<const Registry*>(this)->table_for<Record>());
  }

  template <typename Record>
  const std::map<std::string, Record>& table_for() const {
    if constexpr (std::is_same_v<Record, DatasetRecord>) {
      return datasets_;
    } else if constexpr (std::is_same_v<Record, ModelRecord>) {
      return models_;
    } else {
      static_assert(std::is_same_v<Record, ExperimentRecord>);
      return experiments_;
    }
  }

  template <typename Record>
  std::filesystem::path path_for() const {
    return root_ / RecordTraits<Record>::kFile;
  }

  template <typename Record>
  void load(std::map<std::string, Record>& table) {
    const auto path = path_for<Record>();
    std::ifstream in(path);
    if (!in) return;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      Record r;
      try {
        r = json::parse(line).get<Record>();
      } catch (const json::exception& e) {
        fail(ErrorKind::kFormat, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
      // Later lines win; a rewrite collapses them.
      table[r.id] = std::move(r);
    }
  }

  static void append_line(const std::filesystem::path& path, const std::string& line) {
    std::ofstream out(path, std::ios::app);
    if (!out) fail(ErrorKind::kIo, "cannot open " + path.string());
    out << line << '\n';
    out.flush();
    if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
  }

  template <typename Record>
  void rewrite(const std::map<std::string, Record>& table) {
    const auto path = path_for<Record>();
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) fail(ErrorKind::kIo, "cannot open " + tmp.string());
      for (const auto& [id, r] : table) out << json(r).dump() << '\n';
      if (!out) fail(ErrorKind::kIo, "write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorKind::kIo, "cannot replace " + path.string() + ": " + ec.message());
  }

  std::filesystem::path root_;
  std::map<std::string, DatasetRecord> datasets_;
  std::map<std::string, ModelRecord> models_;
  std::map<std::string, ExperimentRecord> experiments_;
};

}  // namespace kxops
