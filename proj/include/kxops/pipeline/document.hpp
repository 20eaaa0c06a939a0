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

#include <string>
#include <variant>
#include <vector>

#include "kxops/core/error.hpp"
#include "kxops/core/records.hpp"
#include "kxops/pipeline/utf8.hpp"

namespace kxops::pipeline {

// Entity mention over code point offsets [start, end).
struct Entity {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;

  friend bool operator==(const Entity&, const Entity&) = default;
};

// Directed relation between two entries of the document's entity list.
struct Relation {
  std::size_t head = 0;
  std::size_t tail = 0;
  std::string type;

  friend bool operator==(const Relation&, const Relation&) = default;
};

// The unified record every retrieval callback produces and every feature
// extractor consumes.
struct AnnotatedDocument {
  std::string doc_id;
  std::string text;
  std::vector<Entity> entities;
  std::vector<Relation> relations;

  std::string surface(const Entity& e) const { return utf8::substr(text, e.start, e.end); }

  friend bool operator==(const AnnotatedDocument&, const AnnotatedDocument&) = default;
};

inline void validate(const AnnotatedDocument& doc) {
  const std::size_t len = utf8::length(doc.text);
  for (std::size_t i = 0; i < doc.entities.size(); ++i) {
    const auto& e = doc.entities[i];
    if (!(e.start < e.end && e.end <= len)) {
      fail(ErrorKind::kFormat, "document " + doc.doc_id + ": entity " + std::to_string(i) +
                                   " span [" + std::to_string(e.start) + ", " +
                                   std::to_string(e.end) + ") invalid for text of length " +
                                   std::to_string(len));
    }
  }
  for (std::size_t i = 0; i < doc.relations.size(); ++i) {
    const auto& r = doc.relations[i];
    if (r.head >= doc.entities.size() || r.tail >= doc.entities.size()) {
      fail(ErrorKind::kFormat, "document " + doc.doc_id + ": relation " + std::to_string(i) +
                                   " references a missing entity");
    }
  }
}

// Token-level view for sequence labelling models.
struct TaggedSequence {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;

  friend bool operator==(const TaggedSequence&, const TaggedSequence&) = default;
};

// n x n token table: cell (i, j), i <= j, holds the entity type of token span
// i..j; cells of a head-token x tail-token block hold the relation type.
// Empty string means no label.
struct LabelMatrix {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<std::vector<std::string>> cells;

  friend bool operator==(const LabelMatrix&, const LabelMatrix&) = default;
};

using ModelInput = std::variant<AnnotatedDocument, TaggedSequence, LabelMatrix>;

// ---- JSON -------------------------------------------------------------------

inline void to_json(json& j, const Entity& e) {
  j = json{{"start", e.start}, {"end", e.end}, {"type", e.type}};
}
inline void from_json(const json& j, Entity& e) {
  e.start = j.at("start").get<std::size_t>();
  e.end = j.at("end").get<std::size_t>();
  e.type = j.at("type").get<std::string>();
}
inline void to_json(json& j, const Relation& r) {
  j = json{{"head", r.head}, {"tail", r.tail}, {"type", r.type}};
}
inline void from_json(const json& j, Relation& r) {
  r.head = j.at("head").get<std::size_t>();
  r.tail = j.at("tail").get<std::size_t>();
  r.type = j.at("type").get<std::string>();
}
inline void to_json(json& j, const AnnotatedDocument& d) {
  j = json{{"id", d.doc_id}, {"text", d.text}, {"entities", d.entities}, {"relations", d.relations}};
}
inline void from_json(const json& j, AnnotatedDocument& d) {
  d.doc_id = j.value("id", std::string{});
  d.text = j.at("text").get<std::string>();
  d.entities = j.value("entities", std::vector<Entity>{});
  d.relations = j.value("relations", std::vector<Relation>{});
}

}  // namespace kxops::pipeline
