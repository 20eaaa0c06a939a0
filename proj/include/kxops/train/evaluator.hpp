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

#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "kxops/core/error.hpp"
#include "kxops/core/records.hpp"
#include "kxops/pipeline/document.hpp"

namespace kxops::train {

using pipeline::AnnotatedDocument;

struct EntityTriplet {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;

  auto operator<=>(const EntityTriplet&) const = default;
};

// RE output: a relation type for an ordered pair of the document's gold
// entities, identified by their indices.
struct PairLabel {
  std::size_t head = 0;
  std::size_t tail = 0;
  std::string type;

  auto operator<=>(const PairLabel&) const = default;
};

struct Septuplet {
  std::size_t head_start = 0;
  std::size_t head_end = 0;
  std::string head_type;
  std::size_t tail_start = 0;
  std::size_t tail_end = 0;
  std::string tail_type;
  std::string relation_type;

  auto operator<=>(const Septuplet&) const = default;
};

// Standardized decoder output for one document. Which sets are meaningful
// depends on the task: NER fills entities, RE fills pairs, JOINT fills
// entities and relations.
struct PredOutput {
  Task task = Task::kNer;
  std::string doc_id;
  std::set<EntityTriplet> entities;
  std::set<PairLabel> pairs;
  std::set<Septuplet> relations;

  bool operator==(const PredOutput&) const = default;
};

inline void validate(const PredOutput& p, std::size_t text_length, std::size_t entity_count) {
  auto span_ok = [&](std::size_t s, std::size_t e) { return s < e && e <= text_length; };
  for (const auto& e : p.entities) {
    require(span_ok(e.start, e.end), "prediction for " + p.doc_id + ": invalid entity span",
            ErrorKind::kFormat);
  }
  for (const auto& r : p.pairs) {
    require(r.head < entity_count && r.tail < entity_count,
            "prediction for " + p.doc_id + ": pair references a missing entity", ErrorKind::kFormat);
  }
  for (const auto& s : p.relations) {
    require(span_ok(s.head_start, s.head_end) && span_ok(s.tail_start, s.tail_end),
            "prediction for " + p.doc_id + ": invalid septuplet span", ErrorKind::kFormat);
  }
}

// The gold document expressed as the output a perfect decoder would give.
inline PredOutput gold_output(const AnnotatedDocument& doc, Task task) {
  PredOutput out;
  out.task = task;
  out.doc_id = doc.doc_id;
  if (task != Task::kRe) {
    for (const auto& e : doc.entities) out.entities.insert({e.start, e.end, e.type});
  }
  for (const auto& r : doc.relations) {
    const auto& h = doc.entities.at(r.head);
    const auto& t = doc.entities.at(r.tail);
    if (task == Task::kRe) {
      out.pairs.insert({r.head, r.tail, r.type});
    } else if (task == Task::kJoint) {
      out.relations.insert({h.start, h.end, h.type, t.start, t.end, t.type, r.type});
    }
  }
  return out;
}

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const Counts&) const = default;
};

// P = 0 with no predictions, R = 0 with no gold items, F = 0 when P + R = 0.
inline Scores scores_from(const Counts& c) {
  Scores s;
  s.precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  s.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

namespace detail {

template <typename T>
Counts match(const std::set<T>& gold, const std::set<T>& pred) {
  Counts c;
  for (const auto& p : pred) {
    if (gold.count(p)) {
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  c.fn = gold.size() - c.tp;
  return c;
}

}  // namespace detail

inline Counts count_matches(const AnnotatedDocument& gold, const PredOutput& pred, Task task) {
  if (pred.task != task) {
    fail(ErrorKind::kInvalidArgument, "prediction for " + pred.doc_id + " has task " +
                                          std::string(to_string(pred.task)) + ", expected " +
                                          std::string(to_string(task)));
  }
  const auto g = gold_output(gold, task);
  switch (task) {
    case Task::kNer: return detail::match(g.entities, pred.entities);
    case Task::kRe: return detail::match(g.pairs, pred.pairs);
    case Task::kJoint: return detail::match(g.relations, pred.relations);
  }
  return {};
}

inline Counts count_matches(const std::vector<AnnotatedDocument>& gold,
                            const std::vector<PredOutput>& pred, Task task) {
  require(gold.size() == pred.size(), "evaluate: " + std::to_string(gold.size()) +
                                          " gold documents but " + std::to_string(pred.size()) +
                                          " predictions");
  Counts total;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    require(pred[i].doc_id.empty() || pred[i].doc_id == gold[i].doc_id,
            "evaluate: prediction " + pred[i].doc_id + " is not aligned with " + gold[i].doc_id);
    total += count_matches(gold[i], pred[i], task);
  }
  return total;
}

// Micro-averaged exact match.
inline Scores evaluate(const std::vector<AnnotatedDocument>& gold,
                       const std::vector<PredOutput>& pred, Task task) {
  return scores_from(count_matches(gold, pred, task));
}

}  // namespace kxops::train
