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
#include <vector>

#include "kxops/pipeline/document.hpp"
#include "kxops/pipeline/utf8.hpp"

namespace kxops::pipeline {

struct Token {
  std::string text;
  std::size_t start = 0;  // code points
  std::size_t end = 0;
};

inline std::vector<Token> tokenize_whitespace(const std::string& text) {
  const auto cps = utf8::decode(text);
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && utf8::is_space(cps[i])) ++i;
    if (i == cps.size()) break;
    const std::size_t start = i;
    while (i < cps.size() && !utf8::is_space(cps[i])) ++i;
    out.push_back({utf8::encode(std::u32string_view(cps).substr(start, i - start)), start, i});
  }
  return out;
}

namespace detail {

// [first, last] token range covering entity e, or nothing if no token
// overlaps it.
inline bool token_range(const std::vector<Token>& tokens, const Entity& e, std::size_t& first,
                        std::size_t& last) {
  bool found = false;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t].start < e.end && e.start < tokens[t].end) {
      if (!found) first = t;
      last = t;
      found = true;
    }
  }
  return found;
}

}  // namespace detail

// BIOS tags over whitespace tokens: S- for single-token mentions, B-/I- for
// longer ones, O elsewhere. Where mentions overlap the earlier one wins.
inline TaggedSequence to_tagged_sequence(const AnnotatedDocument& doc) {
  const auto tokens = tokenize_whitespace(doc.text);
  TaggedSequence seq;
  seq.doc_id = doc.doc_id;
  seq.tags.assign(tokens.size(), "O");
  for (const auto& t : tokens) seq.tokens.push_back(t.text);
  for (const auto& e : doc.entities) {
    std::size_t first = 0, last = 0;
    if (!detail::token_range(tokens, e, first, last)) continue;
    bool free = true;
    for (std::size_t t = first; t <= last; ++t) free = free && seq.tags[t] == "O";
    if (!free) continue;
    if (first == last) {
      seq.tags[first] = "S-" + e.type;
    } else {
      seq.tags[first] = "B-" + e.type;
      for (std::size_t t = first + 1; t <= last; ++t) seq.tags[t] = "I-" + e.type;
    }
  }
  return seq;
}

inline LabelMatrix to_label_matrix(const AnnotatedDocument& doc) {
  const auto tokens = tokenize_whitespace(doc.text);
  const std::size_t n = tokens.size();
  LabelMatrix m;
  m.doc_id = doc.doc_id;
  for (const auto& t : tokens) m.tokens.push_back(t.text);
  m.cells.assign(n, std::vector<std::string>(n));

  struct Range {
    bool ok = false;
    std::size_t first = 0, last = 0;
  };
  std::vector<Range> ranges(doc.entities.size());
  for (std::size_t i = 0; i < doc.entities.size(); ++i) {
    auto& r = ranges[i];
    r.ok = detail::token_range(tokens, doc.entities[i], r.first, r.last);
    if (r.ok) m.cells[r.first][r.last] = doc.entities[i].type;
  }
  for (const auto& rel : doc.relations) {
    const auto& h = ranges[rel.head];
    const auto& t = ranges[rel.tail];
    if (!h.ok || !t.ok) continue;
    for (std::size_t a = h.first; a <= h.last; ++a) {
      for (std::size_t b = t.first; b <= t.last; ++b) {
        if (m.cells[a][b].empty()) m.cells[a][b] = rel.type;
      }
    }
  }
  return m;
}

}  // namespace kxops::pipeline
