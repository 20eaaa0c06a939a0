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

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <variant>

#include <gtest/gtest.h>

#include "kxops/core/random.hpp"
#include "kxops/core/registry.hpp"
#include "kxops/pipeline/callbacks.hpp"
#include "kxops/pipeline/loader.hpp"
#include "test_util.hpp"

namespace kxops::pipeline {
namespace {

std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(KXOPS_DATA_DIR) / "fixtures" / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Utf8Test, CountsCodePoints) {
  EXPECT_EQ(utf8::length("abc"), 3u);
  EXPECT_EQ(utf8::length("中国银行"), 4u);
  EXPECT_EQ(utf8::substr("招商 银行", 3, 5), "银行");
  EXPECT_THROW(utf8::decode("\xff"), Error);
}

TEST(BiosTest, ReconstructsSpans) {
  std::istringstream in("Bank B-ORG\nof I-ORG\nChina I-ORG\nrose O\n\n张三 S-PER\n来 O\n");
  const auto docs = formats::read_bios(in, "x");
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].text, "Bank of China rose");
  ASSERT_EQ(docs[0].entities.size(), 1u);
  EXPECT_EQ(docs[0].surface(docs[0].entities[0]), "Bank of China");
  EXPECT_EQ(docs[0].entities[0].type, "ORG");
  EXPECT_EQ(docs[1].text, "张三 来");
  EXPECT_EQ(docs[1].entities[0], (Entity{0, 2, "PER"}));
  EXPECT_EQ(docs[1].doc_id, "x:1");
}

TEST(BiosTest, AdjacentMentionsStaySeparate) {
  std::istringstream in("a S-LOC\nb S-LOC\nc B-ORG\nd B-ORG\ne I-ORG\n");
  const auto d = formats::read_bios(in, "x").at(0);
  ASSERT_EQ(d.entities.size(), 4u);
  EXPECT_EQ(d.surface(d.entities[3]), "d e");
}

TEST(BiosTest, RejectsMalformedLines) {
  std::istringstream a("token\n");
  EXPECT_THROW(formats::read_bios(a, "x"), Error);
  std::istringstream b("token X-PER\n");
  EXPECT_THROW(formats::read_bios(b, "x"), Error);
  std::istringstream c("tok  O\n");
  EXPECT_THROW(formats::read_bios(c, "x"), Error);
}

TEST(BiosTest, FiftySentenceRoundTripIsIdentity) {
  const auto path = fixture("bios50.txt");
  const auto docs = formats::read_bios(path);
  ASSERT_EQ(docs.size(), 50u);
  std::vector<TaggedSequence> seqs;
  for (const auto& d : docs) seqs.push_back(to_tagged_sequence(d));
  std::ostringstream out;
  formats::write_bios(seqs, out);
  EXPECT_EQ(out.str(), slurp(path));
}

TEST(JsonFormatsTest, EntityListRoundTrip) {
  const auto docs = formats::read_entity_jsonl(fixture("toy_train.jsonl"));
  ASSERT_EQ(docs.size(), 10u);
  EXPECT_EQ(docs[0].surface(docs[0].entities[1]), "Acme");
  std::ostringstream out;
  formats::write_entity_jsonl(docs, out);
  std::istringstream in(out.str());
  EXPECT_EQ(formats::read_entity_jsonl(in, "y"), docs);
}

TEST(JsonFormatsTest, RelationTriplesShareEntities) {
  std::istringstream in(
      R"({"text":"A founded B and B hired A","triples":[)"
      R"({"head":{"start":0,"end":1,"type":"PER"},"tail":{"start":10,"end":11,"type":"ORG"},"type":"founder"},)"
      R"({"head":{"start":10,"end":11,"type":"ORG"},"tail":{"start":0,"end":1,"type":"PER"},"type":"employs"}]})");
  const auto d = formats::read_relation_jsonl(in, "r").at(0);
  EXPECT_EQ(d.doc_id, "r:0");
  ASSERT_EQ(d.entities.size(), 2u);
  ASSERT_EQ(d.relations.size(), 2u);
  EXPECT_EQ(d.relations[1], (Relation{1, 0, "employs"}));
}

TEST(JsonFormatsTest, BadLineNamesLine) {
  std::istringstream in("{\"text\":\"a\"}\n{oops\n");
  try {
    formats::read_entity_jsonl(in, "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(CsvTest, QuotingAndGrouping) {
  const auto docs = formats::read_entity_csv(fixture("entities.csv"));
  ASSERT_EQ(docs.size(), 3u);
  EXPECT_EQ(docs[0].surface(docs[0].entities[0]), "Alice");
  EXPECT_EQ(docs[1].text, "Bob met \"Carol\"");
  EXPECT_EQ(docs[1].surface(docs[1].entities[1]), "Carol");
  EXPECT_TRUE(docs[2].entities.empty());
  std::istringstream bad("a,b\n");
  EXPECT_THROW(formats::read_entity_csv(bad), Error);
}

TEST(ExtractorTest, MatrixHoldsEntitiesAndRelations) {
  AnnotatedDocument d{"d", "New York hosts Acme", {{0, 8, "LOC"}, {15, 19, "ORG"}}, {{1, 0, "in"}}};
  const auto m = to_label_matrix(d);
  ASSERT_EQ(m.tokens.size(), 4u);
  ASSERT_EQ(m.cells.size(), 4u);
  EXPECT_EQ(m.cells[0][1], "LOC");
  EXPECT_EQ(m.cells[3][3], "ORG");
  EXPECT_EQ(m.cells[3][0], "in");
  EXPECT_EQ(m.cells[3][1], "in");
  EXPECT_EQ(m.cells[0][0], "");
}

TEST(CleanerTest, WhitespaceRemapsOffsets) {
  AnnotatedDocument d{"d", "a  b", {{3, 4, "X"}}, {}};
  const auto c = normalize_whitespace(d);
  EXPECT_EQ(c.text, "a b");
  EXPECT_EQ(c.entities[0], (Entity{2, 3, "X"}));
  EXPECT_EQ(c.surface(c.entities[0]), "b");
}

std::string collapse(const std::string& s) {
  std::string out;
  bool space = false;
  for (char ch : s) {
    if (ch == ' ' || ch == '\t' || ch == '\n') {
      space = !out.empty();
    } else {
      if (space) out += ' ';
      space = false;
      out += ch;
    }
  }
  return out;
}

// Random words separated by random whitespace runs, with entities over word
// runs. After cleaning each surface must equal the collapsed original surface.
TEST(CleanerTest, PropertySurfacesSurviveAlignment) {
  const char* ws[] = {" ", "  ", "\t", " \n ", "   "};
  for (std::uint64_t trial = 0; trial < 300; ++trial) {
    Rng rng(trial);
    AnnotatedDocument d;
    d.doc_id = "p";
    std::vector<std::pair<std::size_t, std::size_t>> words;
    if (rng.below(2)) d.text += ws[rng.below(5)];
    const std::size_t n = 1 + rng.below(8);
    for (std::size_t w = 0; w < n; ++w) {
      if (w) d.text += ws[rng.below(5)];
      const std::size_t s = d.text.size();
      d.text += std::string(1 + rng.below(4), static_cast<char>('a' + rng.below(26)));
      words.emplace_back(s, d.text.size());
    }
    if (rng.below(2)) d.text += ws[rng.below(5)];
    for (int k = 0; k < 3; ++k) {
      const std::size_t a = rng.below(n);
      const std::size_t b = a + rng.below(n - a);
      d.entities.push_back({words[a].first, words[b].second, "T"});
    }
    const auto c = normalize_whitespace(d);
    ASSERT_NO_THROW(validate(c));
    EXPECT_EQ(c.text, collapse(d.text));
    for (std::size_t k = 0; k < d.entities.size(); ++k) {
      EXPECT_EQ(c.surface(c.entities[k]), collapse(d.surface(d.entities[k])));
    }
  }
}

TEST(CleanerTest, EmptyListIsIdentity) {
  const auto cb = builtin_callbacks();
  AnnotatedDocument d{"d", "a  b", {{3, 4, "X"}}, {}};
  EXPECT_EQ(apply_cleaners(d, {}, cb), d);
}

TEST(CleanerTest, InvalidSpanNamesCleaner) {
  CallbackRegistry cb;
  cb.register_cleaner("reverse-spans", [](AnnotatedDocument d) {
    for (auto& e : d.entities) std::swap(e.start, e.end);
    return d;
  });
  AnnotatedDocument d{"d", "abc", {{0, 2, "X"}}, {}};
  try {
    apply_cleaners(d, {"reverse-spans"}, cb);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("reverse-spans"), std::string::npos);
  }
}

TEST(CleanerTest, FusedCleanersMatchStaged) {
  CallbackRegistry cb;
  register_builtin_cleaners(cb);
  auto upper = [](AnnotatedDocument d) {
    for (auto& ch : d.text) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return d;
  };
  cb.register_cleaner("upper", upper);
  cb.register_cleaner("fused", [upper](AnnotatedDocument d) { return upper(normalize_whitespace(std::move(d))); });
  const auto docs = formats::read_entity_jsonl(fixture("toy_train.jsonl"));
  for (auto d : docs) {
    d.text.insert(0, "  ");
    for (auto& e : d.entities) {
      e.start += 2;
      e.end += 2;
    }
    EXPECT_EQ(apply_cleaners(d, {"whitespace", "upper"}, cb), apply_cleaners(d, {"fused"}, cb));
  }
}

TEST(CallbackRegistryTest, DuplicatesAndMissingNames) {
  auto cb = builtin_callbacks();
  EXPECT_EQ(cb.retrieval_count(), 4u);
  EXPECT_EQ(cb.extractor_count(), 3u);
  try {
    cb.register_retrieval("bios-txt", [](const std::filesystem::path&) { return std::vector<AnnotatedDocument>{}; });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kAlreadyExists);
  }
  EXPECT_THROW(cb.extractor("nope"), Error);
}

PipelineSpec spec_for(const std::string& retrieval, const std::string& extractor, std::size_t batch) {
  PipelineSpec s;
  s.retrieval = retrieval;
  s.feature_extractor = extractor;
  s.batch_size = batch;
  return s;
}

TEST(LoaderTest, BatchSizes) {
  CallbackRegistry cb;
  cb.register_retrieval("five", [](const std::filesystem::path&) {
    std::vector<AnnotatedDocument> docs;
    for (int i = 0; i < 5; ++i) docs.push_back({"d" + std::to_string(i), "x", {}, {}});
    return docs;
  });
  register_builtin_extractors(cb);
  Loader loader(cb, "unused", spec_for("five", "identity", 2), 0);
  const auto batches = loader.epoch();
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].size(), 2u);
  EXPECT_EQ(batches[1].size(), 2u);
  EXPECT_EQ(batches[2].size(), 1u);
  EXPECT_THROW(Loader(cb, "unused", spec_for("five", "identity", 0), 0), Error);
  EXPECT_THROW(Loader(cb, "unused", spec_for("six", "identity", 1), 0), Error);
}

TEST(LoaderTest, ShuffleIsSeededPermutation) {
  auto cb = builtin_callbacks();
  auto spec = spec_for("bios-txt", "identity", 7);
  spec.shuffle = true;
  Loader a(cb, fixture("bios50.txt"), spec, 3);
  Loader b(cb, fixture("bios50.txt"), spec, 3);
  auto ids = [](const std::vector<Batch>& batches) {
    std::vector<std::string> out;
    for (const auto& bt : batches) {
      for (const auto& d : bt.documents) out.push_back(d.doc_id);
    }
    return out;
  };
  const auto e0 = ids(a.epoch(0));
  EXPECT_EQ(e0, ids(b.epoch(0)));
  EXPECT_NE(e0, ids(a.epoch(1)));
  auto sorted = e0;
  std::sort(sorted.begin(), sorted.end());
  auto plain = ids(Loader(cb, fixture("bios50.txt"), spec_for("bios-txt", "identity", 7), 3).epoch());
  std::sort(plain.begin(), plain.end());
  EXPECT_EQ(sorted, plain);
}

TEST(LoaderTest, ExtractorErrorCarriesDocumentId) {
  auto cb = builtin_callbacks();
  cb.register_feature_extractor("boom", [](const AnnotatedDocument& d) -> ModelInput {
    if (d.doc_id == "train:3") fail(ErrorKind::kFormat, "bad doc");
    return d;
  });
  Loader loader(cb, fixture("toy_train.jsonl"), spec_for("json-list", "boom", 4), 0);
  try {
    loader.epoch();
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("train:3"), std::string::npos);
  }
}

// Three datasets and two models wired through exactly five callbacks. Every
// pair is loadable through the record bindings alone.
TEST(LoaderTest, NPlusMAdaptation) {
  CallbackRegistry cb;
  register_builtin_extractors(cb);
  CallbackRegistry five;
  five.register_retrieval("bios-txt", [](const std::filesystem::path& p) { return formats::read_bios(p); });
  five.register_retrieval("json-list", [](const std::filesystem::path& p) { return formats::read_entity_jsonl(p); });
  five.register_retrieval("relation-json",
                          [](const std::filesystem::path& p) { return formats::read_relation_jsonl(p); });
  five.register_feature_extractor("token-label", cb.extractor("token-label"));
  five.register_feature_extractor("matrix-nxn", cb.extractor("matrix-nxn"));
  EXPECT_EQ(five.retrieval_count() + five.cleaner_count() + five.extractor_count(), 5u);

  const auto root = kxops::testing::temp_dir("nm");
  Registry reg(root);
  reg.put(DatasetRecord{"d-bios", "d-bios", Task::kNer, "news", {}, fixture("bios50.txt").string(), "bios-txt"});
  reg.put(DatasetRecord{"d-json", "d-json", Task::kNer, "news", {}, fixture("toy_train.jsonl").string(), "json-list"});
  reg.put(DatasetRecord{"d-rel", "d-rel", Task::kNer, "news", {}, fixture("relations.jsonl").string(), "relation-json"});
  reg.put(ModelRecord{"m-seq", "m-seq", Task::kNer, "1", "token-label"});
  reg.put(ModelRecord{"m-mat", "m-mat", Task::kNer, "1", "matrix-nxn"});

  const std::map<std::string, std::size_t> expected_docs = {{"d-bios", 50}, {"d-json", 10}, {"d-rel", 4}};
  int loaded = 0;
  for (const auto& ds : reg.list<DatasetRecord>()) {
    for (const auto& m : reg.list<ModelRecord>()) {
      const auto loader = build_loader(reg, five, ds.id, m.id, LoaderOptions{{}, 8, false}, 1);
      std::size_t n = 0;
      for (const auto& batch : loader.epoch()) {
        EXPECT_LE(batch.size(), 8u);
        for (std::size_t i = 0; i < batch.size(); ++i) {
          ASSERT_NO_THROW(validate(batch.documents[i]));
          if (m.id == "m-seq") {
            EXPECT_TRUE(std::holds_alternative<TaggedSequence>(batch.inputs[i]));
          } else {
            EXPECT_TRUE(std::holds_alternative<LabelMatrix>(batch.inputs[i]));
          }
        }
        n += batch.size();
      }
      EXPECT_EQ(n, expected_docs.at(ds.id)) << ds.id << " x " << m.id;
      ++loaded;
    }
  }
  EXPECT_EQ(loaded, 6);
  std::filesystem::remove_all(root);
}

TEST(LoaderTest, MissingBindingIsNotFound) {
  const auto root = kxops::testing::temp_dir("nb");
  Registry reg(root);
  reg.put(DatasetRecord{"d", "d", Task::kNer, "x", {}, "c.txt", {}});
  reg.put(ModelRecord{"m", "m", Task::kNer, "1", "identity"});
  const auto cb = builtin_callbacks();
  try {
    build_loader(reg, cb, "d", "m", {}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNotFound);
  }
  std::filesystem::remove_all(root);
}

}  // namespace
}  // namespace kxops::pipeline
