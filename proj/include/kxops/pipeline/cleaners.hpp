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

// Collapses whitespace runs to one space and trims both ends. Offsets are
// remapped through the kept characters.
inline AnnotatedDocument normalize_whitespace(AnnotatedDocument doc) {
  const auto cps = utf8::decode(doc.text);
  std::u32string out;
  // remap[p] = number of kept code points before old position p.
  std::vector<std::size_t> remap(cps.size() + 1, 0);
  bool pending_space = false;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    remap[i] = out.size();
    if (utf8::is_space(cps[i])) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(U' ');
      pending_space = false;
      remap[i] = out.size();
    }
    out.push_back(cps[i]);
  }
  remap[cps.size()] = out.size();

  // A whitespace position maps to where the next kept character lands, so a
  // start is pushed right past dropped space. Ends need the opposite: one past
  // the last kept character inside the span.
  auto map_end = [&](std::size_t end) {
    std::size_t p = end;
    while (p > 0 && utf8::is_space(cps[p - 1])) --p;
    return p == 0 ? std::size_t{0} : remap[p - 1] + 1;
  };
  for (auto& e : doc.entities) {
    const std::size_t s = e.start, t = e.end;
    e.start = remap[s];
    e.end = t <= s ? remap[t] : map_end(t);
  }
  doc.text = utf8::encode(out);
  return doc;
}

}  // namespace kxops::pipeline
