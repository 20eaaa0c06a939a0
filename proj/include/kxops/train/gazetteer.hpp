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
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "kxops/core/error.hpp"
#include "kxops/pipeline/extractors.hpp"
#include "kxops/pipeline/loader.hpp"
#include "kxops/train/evaluator.hpp"

namespace kxops::train {

using pipeline::Batch;

// Frequency model used to exercise the trainer end to end. It memorizes
// surface -> entity type counts and, for every ordered pair of co-occurring
// entity types, relation type counts ("" meaning no relation). Decoding is a
// greedy longest match over whitespace tokens followed by the majority
// relation for each type pair. A document is memorized the first time it is
// seen, so later epochs only re-score.
class GazetteerModel {
 public:
  static constexpr const char* kFormat = "kxops-gazetteer";

  explicit GazetteerModel(Task task = Task::kNer) : task_(task) {}

  Task task() const noexcept { return task_; }

  void initialize(std::uint64_t seed) {
    seed_ = seed;
    entities_.clear();
    relations_.clear();
    seen_.clear();
    running_.clear();
    running_ids_.clear();
    max_tokens_ = 0;
  }

  double train_step(const Batch& batch) {
    for (const auto& doc : batch.documents) {
      if (seen_.insert(doc.doc_id).second) memorize(doc);
      if (running_ids_.insert(doc.doc_id).second) running_.push_back(doc);
    }
    std::vector<PredOutput> preds;
    for (const auto& d : running_) preds.push_back(decode_one(d));
    return 1.0 - evaluate(running_, preds, task_).f1;
  }

  std::vector<PredOutput> decode(const Batch& batch) const {
    std::vector<PredOutput> out;
    for (const auto& d : batch.documents) out.push_back(decode_one(d));
    return out;
  }

  PredOutput decode_one(const AnnotatedDocument& doc) const {
    PredOutput out;
    out.task = task_;
    out.doc_id = doc.doc_id;
    if (task_ == Task::kRe) {
      for (std::size_t h = 0; h < doc.entities.size(); ++h) {
        for (std::size_t t = 0; t < doc.entities.size(); ++t) {
          if (h == t) continue;
          const auto rel = relation_for(doc.entities[h].type, doc.entities[t].type);
          if (!rel.empty()) out.pairs.insert({h, t, rel});
        }
      }
      return out;
    }
    const auto found = match_entities(doc.text);
    out.entities.insert(found.begin(), found.end());
    if (task_ == Task::kJoint) {
      for (const auto& h : found) {
        for (const auto& t : found) {
          if (h == t) continue;
          const auto rel = relation_for(h.type, t.type);
          if (!rel.empty()) {
            out.relations.insert({h.start, h.end, h.type, t.start, t.end, t.type, rel});
          }
        }
      }
    }
    return out;
  }

  json to_json_value() const {
    json rel = json::array();
    for (const auto& [key, counts] : relations_) {
      rel.push_back({{"head_type", key.first}, {"tail_type", key.second}, {"counts", counts}});
    }
    return json{{"format", kFormat},
                {"version", 1},
                {"task", to_string(task_)},
                {"seed", seed_},
                {"max_tokens", max_tokens_},
                {"entities", entities_},
                {"relations", rel},
                {"seen", seen_}};
  }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) fail(ErrorKind::kIo, "cannot write " + tmp.string());
      out << to_json_value().dump(2) << '\n';
      if (!out) fail(ErrorKind::kIo, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }

  void load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::kIo, "cannot open model artifact " + path.string());
    json j;
    try {
      j = json::parse(in);
      if (j.at("format") != kFormat || j.at("version") != 1) {
        fail(ErrorKind::kFormat, path.string() + " is not a gazetteer artifact");
      }
      const Task task = parse_task(j.at("task").get<std::string>());
      if (task != task_) {
        fail(ErrorKind::kInvalidArgument, "artifact task " + std::string(to_string(task)) +
                                              " does not match adapter task " +
                                              std::string(to_string(task_)));
      }
      initialize(j.at("seed").get<std::uint64_t>());
      max_tokens_ = j.at("max_tokens").get<std::size_t>();
      entities_ = j.at("entities").get<decltype(entities_)>();
      for (const auto& r : j.at("relations")) {
        relations_[{r.at("head_type").get<std::string>(), r.at("tail_type").get<std::string>()}] =
            r.at("counts").get<std::map<std::string, std::uint64_t>>();
      }
      seen_ = j.at("seen").get<std::set<std::string>>();
    } catch (const json::exception& e) {
      fail(ErrorKind::kFormat, "malformed model artifact " + path.string() + ": " + e.what());
    }
  }

 private:
  template <typename Counts>
  static std::string argmax(const Counts& counts) {
    std::string best;
    std::uint64_t best_count = 0;
    for (const auto& [label, c] : counts) {  // lexicographic, so ties keep the smaller label
      if (c > best_count) {
        best = label;
        best_count = c;
      }
    }
    return best;
  }

  void memorize(const AnnotatedDocument& doc) {
    for (const auto& e : doc.entities) {
      ++entities_[doc.surface(e)][e.type];
      max_tokens_ = std::max(max_tokens_, pipeline::tokenize_whitespace(doc.surface(e)).size());
    }
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::string>> labels;
    for (const auto& r : doc.relations) labels[{r.head, r.tail}].push_back(r.type);
    for (std::size_t h = 0; h < doc.entities.size(); ++h) {
      for (std::size_t t = 0; t < doc.entities.size(); ++t) {
        if (h == t) continue;
        auto& counts = relations_[{doc.entities[h].type, doc.entities[t].type}];
        auto it = labels.find({h, t});
        if (it == labels.end()) {
          ++counts[""];
        } else {
          for (const auto& type : it->second) ++counts[type];
        }
      }
    }
  }

  std::string relation_for(const std::string& head_type, const std::string& tail_type) const {
    auto it = relations_.find({head_type, tail_type});
    return it == relations_.end() ? std::string{} : argmax(it->second);
  }

  std::vector<EntityTriplet> match_entities(const std::string& text) const {
    std::vector<EntityTriplet> out;
    if (entities_.empty()) return out;
    const auto tokens = pipeline::tokenize_whitespace(text);
    std::size_t i = 0;
    while (i < tokens.size()) {
      bool hit = false;
      for (std::size_t len = std::min(max_tokens_, tokens.size() - i); len >= 1; --len) {
        const auto start = tokens[i].start;
        const auto end = tokens[i + len - 1].end;
        auto it = entities_.find(pipeline::utf8::substr(text, start, end));
        if (it != entities_.end()) {
          out.push_back({start, end, argmax(it->second)});
          i += len;
          hit = true;
          break;
        }
      }
      if (!hit) ++i;
    }
    return out;
  }

  Task task_;
  std::uint64_t seed_ = 0;
  std::size_t max_tokens_ = 0;
  std::map<std::string, std::map<std::string, std::uint64_t>> entities_;
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::uint64_t>> relations_;
  std::set<std::string> seen_;
  std::vector<AnnotatedDocument> running_;
  std::set<std::string> running_ids_;
};

}  // namespace kxops::train
