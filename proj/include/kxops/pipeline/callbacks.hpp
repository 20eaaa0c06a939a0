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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kxops/core/error.hpp"
#include "kxops/pipeline/cleaners.hpp"
#include "kxops/pipeline/document.hpp"
#include "kxops/pipeline/extractors.hpp"
#include "kxops/pipeline/formats.hpp"

namespace kxops::pipeline {

using RetrievalFn = std::function<std::vector<AnnotatedDocument>(const std::filesystem::path&)>;
using CleanerFn = std::function<AnnotatedDocument(AnnotatedDocument)>;
using ExtractorFn = std::function<ModelInput(const AnnotatedDocument&)>;

// Named callbacks for the three layers. Datasets bind a retrieval name and
// models bind an extractor name; nothing is written per (dataset, model) pair.
class CallbackRegistry {
 public:
  void register_retrieval(const std::string& name, RetrievalFn fn) {
    insert(retrieval_, "retrieval", name, std::move(fn));
  }
  void register_cleaner(const std::string& name, CleanerFn fn) {
    insert(cleaners_, "cleaner", name, std::move(fn));
  }
  void register_feature_extractor(const std::string& name, ExtractorFn fn) {
    insert(extractors_, "feature extractor", name, std::move(fn));
  }

  const RetrievalFn& retrieval(const std::string& name) const {
    return find(retrieval_, "retrieval", name);
  }
  const CleanerFn& cleaner(const std::string& name) const {
    return find(cleaners_, "cleaner", name);
  }
  const ExtractorFn& extractor(const std::string& name) const {
    return find(extractors_, "feature extractor", name);
  }

  std::size_t retrieval_count() const noexcept { return retrieval_.size(); }
  std::size_t cleaner_count() const noexcept { return cleaners_.size(); }
  std::size_t extractor_count() const noexcept { return extractors_.size(); }

  std::vector<std::string> retrieval_names() const { return names(retrieval_); }
  std::vector<std::string> extractor_names() const { return names(extractors_); }

 private:
  template <typename Fn>
  static void insert(std::map<std::string, Fn>& table, const char* layer, const std::string& name,
                     Fn fn) {
    require(!name.empty(), std::string(layer) + " name must not be empty");
    require(static_cast<bool>(fn), std::string(layer) + " '" + name + "' is empty");
    if (!table.emplace(name, std::move(fn)).second) {
      fail(ErrorKind::kAlreadyExists, std::string(layer) + " '" + name + "' already registered");
    }
  }

  template <typename Fn>
  static const Fn& find(const std::map<std::string, Fn>& table, const char* layer,
                        const std::string& name) {
    auto it = table.find(name);
    if (it == table.end()) {
      fail(ErrorKind::kNotFound, std::string(layer) + " '" + name + "' is not registered");
    }
    return it->second;
  }

  template <typename Fn>
  static std::vector<std::string> names(const std::map<std::string, Fn>& table) {
    std::vector<std::string> out;
    for (const auto& [k, _] : table) out.push_back(k);
    return out;
  }

  std::map<std::string, RetrievalFn> retrieval_;
  std::map<std::string, CleanerFn> cleaners_;
  std::map<std::string, ExtractorFn> extractors_;
};

inline void register_builtin_retrieval(CallbackRegistry& r) {
  r.register_retrieval("bios-txt", [](const std::filesystem::path& p) { return formats::read_bios(p); });
  r.register_retrieval("json-list",
                       [](const std::filesystem::path& p) { return formats::read_entity_jsonl(p); });
  r.register_retrieval("relation-json",
                       [](const std::filesystem::path& p) { return formats::read_relation_jsonl(p); });
  r.register_retrieval("csv-entities",
                       [](const std::filesystem::path& p) { return formats::read_entity_csv(p); });
}

inline void register_builtin_cleaners(CallbackRegistry& r) {
  r.register_cleaner("whitespace", normalize_whitespace);
}

inline void register_builtin_extractors(CallbackRegistry& r) {
  r.register_feature_extractor("token-label",
                               [](const AnnotatedDocument& d) -> ModelInput { return to_tagged_sequence(d); });
  r.register_feature_extractor("matrix-nxn",
                               [](const AnnotatedDocument& d) -> ModelInput { return to_label_matrix(d); });
  r.register_feature_extractor("identity", [](const AnnotatedDocument& d) -> ModelInput { return d; });
}

inline CallbackRegistry builtin_callbacks() {
  CallbackRegistry r;
  register_builtin_retrieval(r);
  register_builtin_cleaners(r);
  register_builtin_extractors(r);
  return r;
}

// Runs the named cleaners in order, validating spans after each one.
inline AnnotatedDocument apply_cleaners(AnnotatedDocument doc, const std::vector<std::string>& names,
                                        const CallbackRegistry& callbacks) {
  for (const auto& name : names) {
    const auto& fn = callbacks.cleaner(name);
    doc = fn(std::move(doc));
    try {
      validate(doc);
    } catch (const Error& e) {
      fail(ErrorKind::kFormat, "cleaner '" + name + "' produced an invalid document: " + e.what());
    }
  }
  return doc;
}

}  // namespace kxops::pipeline
