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
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "kxops/core/error.hpp"
#include "kxops/pipeline/document.hpp"
#include "kxops/pipeline/utf8.hpp"

// Bundled corpus formats.
//
// BIOS tagged text: one "token TAG" pair per line separated by a single
// space, a blank line between sentences. Tags are O, B-<type>, I-<type> and
// S-<type>. A sentence's text is its tokens joined by single spaces.
//
// Entity-list JSON: one object per line,
//   {"id"?, "text", "entities": [{start, end, type}], "relations": [{head, tail, type}]}
// with code point offsets.
//
// Relation-triple JSON: one object per line,
//   {"id"?, "text", "triples": [{"head": {start,end,type}, "tail": {...}, "type"}]}
//
// Entity CSV: header doc_id,text,start,end,type; one row per entity (start and
// end left empty for a document without entities); RFC 4180 quoting.
namespace kxops::pipeline::formats {

namespace detail {

inline std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return in;
}

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

inline std::string doc_id(const std::string& prefix, std::size_t index) {
  return prefix + ":" + std::to_string(index);
}

}  // namespace detail

inline std::vector<AnnotatedDocument> read_bios(std::istream& in, const std::string& prefix) {
  std::vector<AnnotatedDocument> docs;
  AnnotatedDocument cur;
  std::size_t cursor = 0;  // code points emitted so far
  bool open_entity = false;
  std::size_t lineno = 0;

  auto close_entity = [&] { open_entity = false; };
  auto flush = [&] {
    if (cur.text.empty() && cur.entities.empty()) return;
    cur.doc_id = detail::doc_id(prefix, docs.size());
    docs.push_back(std::move(cur));
    cur = AnnotatedDocument{};
    cursor = 0;
    close_entity();
  };

  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty()) {
      flush();
      continue;
    }
    const auto sep = line.find(' ');
    if (sep == std::string::npos || sep == 0 || line.find(' ', sep + 1) != std::string::npos) {
      fail(ErrorKind::kFormat, "BIOS line " + std::to_string(lineno) +
                                   ": expected 'token TAG', got '" + line + "'");
    }
    const std::string token = line.substr(0, sep);
    const std::string tag = line.substr(sep + 1);

    if (!cur.text.empty()) {
      cur.text += ' ';
      ++cursor;
    }
    const std::size_t start = cursor;
    cur.text += token;
    cursor += utf8::length(token);

    if (tag == "O") {
      close_entity();
      continue;
    }
    if (tag.size() < 3 || tag[1] != '-' ||
        (tag[0] != 'B' && tag[0] != 'I' && tag[0] != 'S')) {
      fail(ErrorKind::kFormat, "BIOS line " + std::to_string(lineno) + ": bad tag '" + tag + "'");
    }
    const std::string type = tag.substr(2);
    const char kind = tag[0];
    if (kind == 'I' && open_entity && cur.entities.back().type == type) {
      cur.entities.back().end = cursor;
      continue;
    }
    // B, S, or an I that cannot continue the open mention starts a new one.
    cur.entities.push_back({start, cursor, type});
    open_entity = kind != 'S';
  }
  flush();
  return docs;
}

inline std::vector<AnnotatedDocument> read_bios(const std::filesystem::path& path) {
  auto in = detail::open(path);
  return read_bios(in, path.stem().string());
}

inline void write_bios(const std::vector<TaggedSequence>& sentences, std::ostream& out) {
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i > 0) out << '\n';
    const auto& s = sentences[i];
    for (std::size_t t = 0; t < s.tokens.size(); ++t) out << s.tokens[t] << ' ' << s.tags[t] << '\n';
  }
}

inline std::vector<AnnotatedDocument> read_entity_jsonl(std::istream& in,
                                                        const std::string& prefix) {
  std::vector<AnnotatedDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::strip_cr(line).empty()) continue;
    try {
      auto doc = json::parse(line).get<AnnotatedDocument>();
      if (doc.doc_id.empty()) doc.doc_id = detail::doc_id(prefix, docs.size());
      docs.push_back(std::move(doc));
    } catch (const json::exception& e) {
      fail(ErrorKind::kFormat, "entity JSON line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

inline std::vector<AnnotatedDocument> read_entity_jsonl(const std::filesystem::path& path) {
  auto in = detail::open(path);
  return read_entity_jsonl(in, path.stem().string());
}

inline void write_entity_jsonl(const std::vector<AnnotatedDocument>& docs, std::ostream& out) {
  for (const auto& d : docs) out << json(d).dump() << '\n';
}

inline std::vector<AnnotatedDocument> read_relation_jsonl(std::istream& in,
                                                          const std::string& prefix) {
  std::vector<AnnotatedDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::strip_cr(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      AnnotatedDocument doc;
      doc.doc_id = j.value("id", detail::doc_id(prefix, docs.size()));
      doc.text = j.at("text").get<std::string>();
      std::map<std::tuple<std::size_t, std::size_t, std::string>, std::size_t> index;
      auto entity_index = [&](const json& ej) {
        Entity e = ej.get<Entity>();
        auto key = std::make_tuple(e.start, e.end, e.type);
        auto [it, inserted] = index.emplace(key, doc.entities.size());
        if (inserted) doc.entities.push_back(std::move(e));
        return it->second;
      };
      for (const auto& t : j.value("triples", json::array())) {
        const std::size_t h = entity_index(t.at("head"));
        const std::size_t tl = entity_index(t.at("tail"));
        doc.relations.push_back({h, tl, t.at("type").get<std::string>()});
      }
      docs.push_back(std::move(doc));
    } catch (const json::exception& e) {
      fail(ErrorKind::kFormat, "relation JSON line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

inline std::vector<AnnotatedDocument> read_relation_jsonl(const std::filesystem::path& path) {
  auto in = detail::open(path);
  return read_relation_jsonl(in, path.stem().string());
}

// Splits CSV text into records of fields (RFC 4180 quoting).
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && in.peek() == '\n') in.get();
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (quoted) fail(ErrorKind::kFormat, "CSV: unterminated quoted field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<AnnotatedDocument> read_entity_csv(std::istream& in) {
  const auto rows = parse_csv(in);
  if (rows.empty()) return {};
  const std::vector<std::string> expected = {"doc_id", "text", "start", "end", "type"};
  if (rows.front() != expected) {
    fail(ErrorKind::kFormat, "CSV header must be doc_id,text,start,end,type");
  }
  std::vector<AnnotatedDocument> docs;
  std::map<std::string, std::size_t> by_id;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 5) {
      fail(ErrorKind::kFormat, "CSV row " + std::to_string(r + 1) + ": expected 5 fields");
    }
    auto [it, inserted] = by_id.emplace(f[0], docs.size());
    if (inserted) docs.push_back(AnnotatedDocument{f[0], f[1], {}, {}});
    auto& doc = docs[it->second];
    if (doc.text != f[1]) {
      fail(ErrorKind::kFormat, "CSV row " + std::to_string(r + 1) + ": text differs for doc " + f[0]);
    }
    if (f[2].empty() && f[3].empty()) continue;
    try {
      doc.entities.push_back({std::stoul(f[2]), std::stoul(f[3]), f[4]});
    } catch (const std::logic_error&) {
      fail(ErrorKind::kFormat, "CSV row " + std::to_string(r + 1) + ": bad offsets");
    }
  }
  return docs;
}

inline std::vector<AnnotatedDocument> read_entity_csv(const std::filesystem::path& path) {
  auto in = detail::open(path);
  return read_entity_csv(in);
}

}  // namespace kxops::pipeline::formats
