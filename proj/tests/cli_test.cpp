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

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "kxops/cli/app.hpp"
#include "kxops/core/registry.hpp"
#include "test_util.hpp"

namespace {

using kxops::json;
namespace fs = std::filesystem;

std::vector<float> values(const kxops::EmbeddingMatrix& m) { return {m.data().begin(), m.data().end()}; }

struct Result {
  int code;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override { root_ = kxops::testing::temp_dir("cli"); }
  void TearDown() override { fs::remove_all(root_); }

  Result run(std::vector<std::string> args, bool with_root = true) {
    if (with_root) args.insert(args.begin(), {"--registry-root", (root_ / "reg").string()});
    std::ostringstream out, err;
    const int code = kxops::cli::run(args, out, err);
    return {code, out.str(), err.str()};
  }

  std::string write(const std::string& name, const std::string& text) {
    const auto p = root_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  std::string emb(const std::string& name, std::size_t n, std::uint64_t seed, double shift = 0.0) {
    const auto p = root_ / name;
    kxops::write_embedding(kxops::testing::gaussian(n, 3, seed, {shift}), p);
    return p.string();
  }

  static std::string data(const std::string& name) { return (fs::path(KXOPS_DATA_DIR) / name).string(); }

  fs::path root_;
};

TEST_F(CliTest, EmptyDatasetListSucceeds) {
  const auto r = run({"dataset", "list"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("(none)"), std::string::npos);
  const auto j = run({"--json", "dataset", "list"});
  EXPECT_EQ(j.code, 0);
  EXPECT_EQ(json::parse(j.out), json::array());
}

TEST_F(CliTest, UnknownSubcommandIsUsageError) {
  const auto r = run({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"dataset", "add", "--id", "x"}).code, 2);  // missing --domain
  EXPECT_EQ(run({"simulate", "--random", "many"}).code, 2);
}

TEST_F(CliTest, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("recommend"), std::string::npos);
}

TEST_F(CliTest, DomainErrorsExitOne) {
  EXPECT_EQ(run({"dataset", "add", "--id", "a", "--domain", "news"}).code, 0);
  const auto dup = run({"dataset", "add", "--id", "a", "--domain", "news"});
  EXPECT_EQ(dup.code, 1);
  EXPECT_NE(dup.err.find("already_exists"), std::string::npos);
  EXPECT_EQ(run({"dataset", "add", "--id", "b", "--domain", "news", "--task", "pos"}).code, 1);
  EXPECT_EQ(run({"experiment", "status", "exp-9999"}).code, 1);
  EXPECT_EQ(run({"similarity", "--a", write("junk.emb1", "not an embedding"), "--b",
                 write("junk2.emb1", "x")}).code,
            1);
  EXPECT_EQ(run({"similarity", "--a", emb("a.emb1", 10, 1), "--b", emb("b.emb1", 10, 2), "--metrics", "cosine"}).code,
            1);
  EXPECT_EQ(run({"recommend", "--target", "nowhere", "--fixture", "paper_tables.json"}).code, 1);
  EXPECT_EQ(run({"experiment", "run", "--config", write("bad.yaml", "dataset_id: [unclosed\n")}).code, 1);
  EXPECT_EQ(run({"simulate", "--cluster", write("c.json", "{}"), "--trace", write("t.json", "[]")}).code, 1);
  EXPECT_EQ(run({"status", "t1", "--gateway", "127.0.0.1:1"}).code, 1);
}

TEST_F(CliTest, RecommendFromFixtureNamesBertSpan) {
  const auto r = run({"recommend", "--target", "finance", "--desired-metric", "f1", "--fixture",
                      "paper_tables.json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("bert_span"), std::string::npos);
  EXPECT_NE(r.out.find("renmin"), std::string::npos);

  const auto j = run({"--json", "recommend", "--target", "finance", "--desired-metric", "f1", "--fixture",
                      data("paper_tables.json")});
  ASSERT_EQ(j.code, 0) << j.err;
  const auto doc = json::parse(j.out);
  EXPECT_EQ(doc.at("model_id"), "bert_span");
  EXPECT_EQ(doc.at("neighbor_dataset_id"), "renmin");
}

TEST_F(CliTest, AccuracyOverFixture) {
  const auto j = run({"--json", "accuracy", "--fixture", "paper_tables.json"});
  ASSERT_EQ(j.code, 0) << j.err;
  const auto doc = json::parse(j.out);
  EXPECT_EQ(doc.at("hits"), 16);
  EXPECT_EQ(doc.at("total"), 21);
}

TEST_F(CliTest, SelfSimilarityIsZero) {
  const auto a = emb("a.emb1", 200, 5);
  const auto r = run({"--json", "similarity", "--a", a, "--b", a, "--metrics", "mmd,fbd"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_NEAR(doc["metrics"]["mmd"]["value"].get<double>(), 0.0, 1e-9);
  EXPECT_NEAR(doc["metrics"]["fbd"]["value"].get<double>(), 0.0, 1e-6);
}

TEST_F(CliTest, RegistryModeRanksCloserDatasetFirst) {
  ASSERT_EQ(run({"dataset", "add", "--id", "t", "--domain", "news", "--embedding", emb("t.emb1", 150, 1)}).code, 0);
  ASSERT_EQ(run({"dataset", "add", "--id", "near", "--domain", "news", "--embedding", emb("n.emb1", 150, 2, 0.2)}).code,
            0);
  ASSERT_EQ(run({"dataset", "add", "--id", "far", "--domain", "news", "--embedding", emb("f.emb1", 150, 3, 4.0)}).code,
            0);
  ASSERT_EQ(run({"dataset", "add", "--id", "other", "--domain", "legal", "--embedding", emb("o.emb1", 150, 4)}).code,
            0);
  const auto r = run({"--json", "--seed", "9", "similarity", "--target", "t", "--sample-size", "100", "--repeats",
                      "2", "--metrics", "mmd,fbd", "--weights", "mmd=2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_EQ(doc.at("final_order"), json({"near", "far"}));
}

TEST_F(CliTest, EmbedImportAttachesValidatedCopy) {
  ASSERT_EQ(run({"dataset", "add", "--id", "d", "--domain", "news"}).code, 0);
  const auto src = emb("src.emb1", 7, 3);
  const auto r = run({"--json", "embed", "import", "--dataset", "d", "--file", src});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out).at("rows"), 7);

  kxops::Registry reg(root_ / "reg");
  const auto ds = reg.dataset("d");
  ASSERT_TRUE(ds.embedding_ref.has_value());
  const auto copied = kxops::read_embedding(reg.root() / *ds.embedding_ref);
  const auto orig = kxops::read_embedding(src);
  EXPECT_EQ(values(copied), values(orig));

  // A truncated file is rejected and the dataset keeps its embedding.
  std::string bytes;
  {
    std::ifstream in(src, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto bad = root_ / "bad.emb1";
  std::ofstream(bad, std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  EXPECT_EQ(run({"embed", "import", "--dataset", "d", "--file", bad.string()}).code, 1);
  EXPECT_EQ(values(kxops::read_embedding(reg.root() / *reg.dataset("d").embedding_ref)), values(orig));
  EXPECT_EQ(run({"embed", "import", "--dataset", "missing", "--file", src}).code, 1);
}

TEST_F(CliTest, ExperimentRunStatusList) {
  ASSERT_EQ(run({"dataset", "add", "--id", "toy", "--domain", "news", "--task", "joint", "--corpus",
                 data("fixtures/toy_train.jsonl"), "--retrieval", "json-list"})
                .code,
            0);
  ASSERT_EQ(run({"model", "add", "--id", "gaz", "--task", "joint", "--extractor", "identity"}).code, 0);
  const auto cfg = write("exp.yaml", "dataset_id: toy\nmodel_id: gaz\nhyperparams:\n  epochs: 2\n  batch_size: 4\n  seed: 4\n");
  const auto r = run({"--json", "experiment", "run", "--config", cfg});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rec = json::parse(r.out);
  EXPECT_EQ(rec.at("status"), "COMPLETED");
  EXPECT_EQ(rec.at("history").size(), 2u);
  const std::string id = rec.at("id");

  const auto st = run({"experiment", "status", id});
  EXPECT_EQ(st.code, 0);
  EXPECT_NE(st.out.find("COMPLETED"), std::string::npos);
  const auto ls = run({"--json", "experiment", "list"});
  EXPECT_EQ(json::parse(ls.out).size(), 1u);
  const auto models = run({"--json", "model", "list"});
  EXPECT_EQ(json::parse(models.out).at(0).at("id"), "gaz");
}

TEST_F(CliTest, SimulateFromFiles) {
  const auto cluster = write("cluster.json", R"({"machines": [
      {"machine_id": "a", "weight": 2, "workers": 1},
      {"machine_id": "b", "weight": 1, "workers": 1}]})");
  const auto trace = write("trace.json", R"([
      {"task_id": "t1", "arrival": 0, "duration": 6},
      {"task_id": "t2", "arrival": 1, "duration": 6},
      {"task_id": "t3", "arrival": 2, "duration": 6}])");
  const auto r = run({"--json", "simulate", "--cluster", cluster, "--trace", trace}, false);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_TRUE(doc["checks"]["conservation"].get<bool>());
  std::map<std::string, std::string> where;
  for (const auto& t : doc["tasks"]) where[t["task_id"]] = t["machine_id"];
  EXPECT_EQ(where["t1"], "a");
  EXPECT_EQ(where["t2"], "b");
  EXPECT_EQ(where["t3"], "a");

  const auto rnd = run({"--json", "--seed", "5", "simulate", "--random", "12"}, false);
  ASSERT_EQ(rnd.code, 0) << rnd.err;
  EXPECT_EQ(json::parse(rnd.out)["tasks"].size(), 12u);
}

TEST_F(CliTest, BinaryHonorsExitCodeContract) {
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  const std::string bin = KXOPS_CLI_PATH;
  const std::string reg = " --registry-root " + (root_ / "bin-reg").string();
  EXPECT_EQ(status(bin + reg + " dataset list"), 0);
  EXPECT_EQ(status(bin + reg + " no-such-command"), 2);
  EXPECT_EQ(status(bin + reg + " experiment status nope"), 1);
}

}  // namespace
