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
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <yaml-cpp/yaml.h>

#include "kxops/core/error.hpp"
#include "kxops/core/records.hpp"

namespace kxops::train {

// Keys: dataset_id, model_id, hyperparams.{epochs, batch_size, seed, ...},
// desired_metric, optional resume_from. Other hyperparameters are carried
// through as opaque scalars.
struct ExperimentConfig {
  std::string dataset_id;
  std::string model_id;
  Hyperparams hyperparams;
  DesiredMetric desired_metric = DesiredMetric::kF1;
  std::optional<std::string> resume_from;

  std::int64_t int_param(const std::string& key) const {
    auto it = hyperparams.find(key);
    if (it == hyperparams.end()) fail(ErrorKind::kInvalidArgument, "hyperparams." + key + " is required");
    const auto* v = std::get_if<std::int64_t>(&it->second);
    if (!v) fail(ErrorKind::kInvalidArgument, "hyperparams." + key + " must be an integer");
    return *v;
  }

  std::int64_t epochs() const { return int_param("epochs"); }
  std::int64_t batch_size() const { return int_param("batch_size"); }
  std::uint64_t seed() const { return static_cast<std::uint64_t>(int_param("seed")); }

  bool flag(const std::string& key, bool fallback) const {
    auto it = hyperparams.find(key);
    if (it == hyperparams.end()) return fallback;
    const auto* v = std::get_if<bool>(&it->second);
    require(v != nullptr, "hyperparams." + key + " must be a boolean");
    return *v;
  }

  void validate() const {
    require(!dataset_id.empty(), "config: dataset_id is required");
    require(!model_id.empty(), "config: model_id is required");
    require(epochs() >= 1, "config: hyperparams.epochs must be >= 1");
    require(batch_size() >= 1, "config: hyperparams.batch_size must be >= 1");
    require(int_param("seed") >= 0, "config: hyperparams.seed must be >= 0");
  }
};

inline void to_json(json& j, const ExperimentConfig& c) {
  json hp = json::object();
  for (const auto& [k, v] : c.hyperparams) hp[k] = scalar_to_json(v);
  j = json{{"dataset_id", c.dataset_id},
           {"model_id", c.model_id},
           {"hyperparams", hp},
           {"desired_metric", to_string(c.desired_metric)}};
  if (c.resume_from) j["resume_from"] = *c.resume_from;
}

inline void from_json(const json& j, ExperimentConfig& c) {
  require(j.is_object(), "config must be a mapping", ErrorKind::kFormat);
  c.dataset_id = j.at("dataset_id").get<std::string>();
  c.model_id = j.at("model_id").get<std::string>();
  c.hyperparams.clear();
  for (const auto& [k, v] : j.at("hyperparams").items()) c.hyperparams[k] = scalar_from_json(v);
  c.desired_metric = parse_desired_metric(j.value("desired_metric", std::string("f1")));
  c.resume_from.reset();
  if (j.contains("resume_from") && !j.at("resume_from").is_null()) {
    c.resume_from = j.at("resume_from").get<std::string>();
  }
}

namespace detail {

inline json yaml_scalar(const YAML::Node& node) {
  const auto& s = node.Scalar();
  if (node.Tag() == "!") return s;  // explicitly quoted
  if (s == "null" || s == "~" || s.empty()) return nullptr;
  bool b;
  if (YAML::convert<bool>::decode(node, b)) return b;
  std::int64_t i;
  if (YAML::convert<std::int64_t>::decode(node, i)) return i;
  double d;
  if (YAML::convert<double>::decode(node, d)) return d;
  return s;
}

inline json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Map: {
      json j = json::object();
      for (const auto& kv : node) j[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return j;
    }
    case YAML::NodeType::Sequence: {
      json j = json::array();
      for (const auto& item : node) j.push_back(yaml_to_json(item));
      return j;
    }
    case YAML::NodeType::Scalar: return yaml_scalar(node);
    default: return nullptr;
  }
}

}  // namespace detail

// Accepts the YAML template or its JSON equivalent (JSON is valid YAML, but
// the JSON parser is used when the text looks like JSON to keep number types
// exact).
inline ExperimentConfig parse_config(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  try {
    if (first != std::string::npos && text[first] == '{') return json::parse(text).get<ExperimentConfig>();
    return detail::yaml_to_json(YAML::Load(text)).get<ExperimentConfig>();
  } catch (const YAML::Exception& e) {
    fail(ErrorKind::kFormat, std::string("config: ") + e.what());
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("config: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace kxops::train
