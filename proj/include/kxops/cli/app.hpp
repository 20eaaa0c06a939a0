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

#include <signal.h>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kxops/core/embedding.hpp"
#include "kxops/core/error.hpp"
#include "kxops/core/records.hpp"
#include "kxops/core/registry.hpp"
#include "kxops/metrics/similarity.hpp"
#include "kxops/pipeline/callbacks.hpp"
#include "kxops/recommend/ranking.hpp"
#include "kxops/recommend/recommender.hpp"
#include "kxops/recommend/sources.hpp"
#include "kxops/sched/service.hpp"
#include "kxops/sched/sim.hpp"
#include "kxops/train/config.hpp"
#include "kxops/train/trainer.hpp"

// Command-line front end. Exit codes: 0 success, 1 domain error, 2 usage.
namespace kxops::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kGatewayEnv = "KXOPS_GATEWAY";
inline constexpr const char* kDataDirEnv = "KXOPS_DATA_DIR";

namespace detail {

using metrics::Metric;

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

inline std::vector<Metric> parse_metrics(const std::string& s) {
  std::vector<Metric> out;
  for (const auto& name : split(s, ',')) {
    const Metric m = metrics::parse_metric(name);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  require(!out.empty(), "--metrics lists no metric");
  return out;
}

// "mmd=2,fbd=1"; metrics not mentioned get weight 1.
inline recommend::Weights parse_weights(const std::string& s, const std::vector<Metric>& metrics) {
  auto w = recommend::uniform_weights(metrics);
  for (const auto& item : split(s, ',')) {
    const auto eq = item.find('=');
    require(eq != std::string::npos, "weight '" + item + "' must look like metric=value");
    const Metric m = metrics::parse_metric(item.substr(0, eq));
    require(std::find(metrics.begin(), metrics.end(), m) != metrics.end(),
            "weight given for metric " + std::string(metrics::to_string(m)) + " not in --metrics");
    try {
      w[m] = std::stod(item.substr(eq + 1));
    } catch (const std::logic_error&) {
      fail(ErrorKind::kInvalidArgument, "bad weight value in '" + item + "'");
    }
  }
  return w;
}

// A bare fixture name also resolves against the bundled data directory.
inline std::filesystem::path resolve_data_file(const std::string& name) {
  std::filesystem::path p(name);
  if (std::filesystem::exists(p)) return p;
  std::vector<std::filesystem::path> dirs;
  if (const char* env = std::getenv(kDataDirEnv)) dirs.emplace_back(env);
#ifdef KXOPS_DEFAULT_DATA_DIR
  dirs.emplace_back(KXOPS_DEFAULT_DATA_DIR);
#endif
  for (const auto& d : dirs) {
    if (std::filesystem::exists(d / p)) return d / p;
  }
  fail(ErrorKind::kNotFound, "file not found: " + name);
}

inline void print_table(std::ostream& out, const std::vector<std::string>& headers,
                        const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) width[c] = headers[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < headers.size(); ++c) {
      const std::string v = c < cells.size() ? cells[c] : "";
      out << (c ? "  " : "") << std::left << std::setw(static_cast<int>(width[c])) << v;
    }
    out << '\n';
  };
  line(headers);
  if (rows.empty()) out << "(none)\n";
  for (const auto& r : rows) line(r);
}

inline std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

// Paths that exist relative to the working directory are stored absolute;
// anything else is kept as given and later resolved against the registry root.
inline std::string from_cwd(const std::string& p) {
  return std::filesystem::exists(p) ? std::filesystem::absolute(p).lexically_normal().string() : p;
}

inline std::string opt(const std::optional<std::string>& v) { return v.value_or("-"); }

inline void wait_for_signal(sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
}

// Blocks SIGINT/SIGTERM in this thread (and threads started later) so that
// sigwait can pick them up.
inline sigset_t block_stop_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

}  // namespace detail

struct Globals {
  bool json = false;
  std::string registry_root;
  std::uint64_t seed = 0;
};

class App {
 public:
  App(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(const std::vector<std::string>& args) {
    CLI::App app{"kxops: dataset similarity, model recommendation and experiment automation"};
    app.name("kxops");
    app.set_help_all_flag("--help-all", "Show help for all subcommands");
    app.add_flag("--json", g_.json, "Machine-readable JSON on stdout");
    app.add_option("--registry-root", g_.registry_root,
                   "Registry directory (default: $KXOPS_REGISTRY_ROOT or ./registry)");
    app.add_option("--seed", g_.seed, "Seed for every randomized step");
    app.require_subcommand(1);
    app.fallthrough();

    add_dataset(app);
    add_model(app);
    add_embed(app);
    add_similarity(app);
    add_recommend(app);
    add_accuracy(app);
    add_experiment(app);
    add_serve(app);
    add_submit_status(app);
    add_simulate(app);

    try {
      std::vector<std::string> rev(args.rbegin(), args.rend());
      app.parse(rev);
    } catch (const CLI::CallForHelp&) {
      out_ << app.help();
      return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
      out_ << app.help("", CLI::AppFormatMode::All);
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      err_ << "error: " << e.what() << "\n\n" << app.help();
      return kExitUsage;
    }
    if (!action_) {
      err_ << app.help();
      return kExitUsage;
    }
    try {
      return action_();
    } catch (const Error& e) {
      err_ << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
      return kExitDomain;
    } catch (const json::exception& e) {
      err_ << "error (format): " << e.what() << '\n';
      return kExitDomain;
    } catch (const std::filesystem::filesystem_error& e) {
      err_ << "error (io): " << e.what() << '\n';
      return kExitDomain;
    }
  }

 private:
  using Metric = metrics::Metric;

  void on(CLI::App* sub, std::function<int()> fn) {
    sub->callback([this, fn = std::move(fn)] { action_ = fn; });
  }

  Registry registry() const { return Registry(resolve_registry_root(g_.registry_root)); }

  void emit(const json& j) { out_ << j.dump(2) << '\n'; }

  // ---- dataset / model ----------------------------------------------------

  void add_dataset(CLI::App& app) {
    auto* ds = app.add_subcommand("dataset", "Register and list datasets");
    ds->require_subcommand(1);
    auto* add = ds->add_subcommand("add", "Register a dataset");
    auto rec = std::make_shared<DatasetRecord>();
    auto task = std::make_shared<std::string>("ner");
    auto emb = std::make_shared<std::string>();
    auto corpus = std::make_shared<std::string>();
    auto retrieval = std::make_shared<std::string>();
    add->add_option("--id", rec->id, "Dataset id")->required();
    add->add_option("--name", rec->name, "Display name (default: id)");
    add->add_option("--task", *task, "ner | re | joint")->capture_default_str();
    add->add_option("--domain", rec->domain, "Domain/category label")->required();
    add->add_option("--embedding", *emb, "EMB1 file (path or registry-relative)");
    add->add_option("--corpus", *corpus, "Corpus file read by the retrieval callback");
    add->add_option("--retrieval", *retrieval, "Retrieval callback name, e.g. bios-txt");
    on(add, [=, this] {
      auto r = *rec;
      if (r.name.empty()) r.name = r.id;
      r.task = parse_task(*task);
      if (!emb->empty()) r.embedding_ref = detail::from_cwd(*emb);
      if (!corpus->empty()) r.corpus_ref = detail::from_cwd(*corpus);
      if (!retrieval->empty()) r.retrieval = *retrieval;
      auto reg = registry();
      reg.put(r);
      if (g_.json) {
        emit(json(r));
      } else {
        out_ << "added dataset " << r.id << '\n';
      }
      return kExitOk;
    });
    auto* list = ds->add_subcommand("list", "List datasets");
    on(list, [this] {
      const auto items = registry().list<DatasetRecord>();
      if (g_.json) {
        emit(json(items));
        return kExitOk;
      }
      std::vector<std::vector<std::string>> rows;
      for (const auto& d : items) {
        rows.push_back({d.id, d.name, std::string(to_string(d.task)), d.domain, detail::opt(d.embedding_ref),
                        detail::opt(d.retrieval)});
      }
      detail::print_table(out_, {"ID", "NAME", "TASK", "DOMAIN", "EMBEDDING", "RETRIEVAL"}, rows);
      return kExitOk;
    });
  }

  void add_model(CLI::App& app) {
    auto* md = app.add_subcommand("model", "Register and list models");
    md->require_subcommand(1);
    auto* add = md->add_subcommand("add", "Register a model");
    auto rec = std::make_shared<ModelRecord>();
    auto task = std::make_shared<std::string>("ner");
    auto extractor = std::make_shared<std::string>();
    rec->version = "1";
    add->add_option("--id", rec->id, "Model id")->required();
    add->add_option("--name", rec->name, "Display name (default: id)");
    add->add_option("--task", *task, "ner | re | joint")->capture_default_str();
    add->add_option("--version", rec->version, "Model version")->capture_default_str();
    add->add_option("--extractor", *extractor, "Feature extractor name, e.g. token-label");
    on(add, [=, this] {
      auto r = *rec;
      if (r.name.empty()) r.name = r.id;
      r.task = parse_task(*task);
      if (!extractor->empty()) r.extractor = *extractor;
      auto reg = registry();
      reg.put(r);
      if (g_.json) {
        emit(json(r));
      } else {
        out_ << "added model " << r.id << '\n';
      }
      return kExitOk;
    });
    auto* list = md->add_subcommand("list", "List models");
    on(list, [this] {
      const auto items = registry().list<ModelRecord>();
      if (g_.json) {
        emit(json(items));
        return kExitOk;
      }
      std::vector<std::vector<std::string>> rows;
      for (const auto& m : items) {
        rows.push_back({m.id, m.name, std::string(to_string(m.task)), m.version, detail::opt(m.extractor)});
      }
      detail::print_table(out_, {"ID", "NAME", "TASK", "VERSION", "EXTRACTOR"}, rows);
      return kExitOk;
    });
  }

  // ---- embeddings ---------------------------------------------------------

  void add_embed(CLI::App& app) {
    auto* emb = app.add_subcommand("embed", "Embedding files");
    emb->require_subcommand(1);
    auto* imp = emb->add_subcommand("import", "Validate an EMB1 file and attach it to a dataset");
    auto dataset = std::make_shared<std::string>();
    auto file = std::make_shared<std::string>();
    imp->add_option("--dataset", *dataset, "Dataset id")->required();
    imp->add_option("--file", *file, "EMB1 file")->required();
    on(imp, [=, this] {
      const auto m = read_embedding(*file);
      auto reg = registry();
      auto ds = reg.dataset(*dataset);
      const std::filesystem::path rel = std::filesystem::path("embeddings") / (*dataset + ".emb1");
      const auto dest = reg.root() / rel;
      std::filesystem::create_directories(dest.parent_path());
      auto tmp = dest;
      tmp += ".tmp";
      write_embedding(m, tmp);
      std::filesystem::rename(tmp, dest);
      ds.embedding_ref = rel.generic_string();
      reg.update(ds);
      const json j = {{"dataset_id", ds.id}, {"rows", m.n_rows()}, {"dim", m.dim()},
                      {"embedding_ref", *ds.embedding_ref}};
      if (g_.json) {
        emit(j);
      } else {
        out_ << "imported " << m.n_rows() << " x " << m.dim() << " embedding for " << ds.id << " -> "
             << *ds.embedding_ref << '\n';
      }
      return kExitOk;
    });
  }

  // ---- similarity / recommendation ---------------------------------------

  struct MetricFlags {
    std::string metrics = "mmd,fbd,pr,mauve";
    std::string weights;
    std::size_t sample_size = 1000;
    std::size_t repeats = 10;
  };

  static void add_metric_flags(CLI::App* sub, MetricFlags& f, bool with_weights) {
    sub->add_option("--metrics", f.metrics, "Comma list of mmd, fbd, pr, mauve")->capture_default_str();
    if (with_weights) sub->add_option("--weights", f.weights, "Per-metric weights, e.g. mmd=2,fbd=1");
    sub->add_option("--sample-size", f.sample_size, "Rows drawn per repeat")->capture_default_str();
    sub->add_option("--repeats", f.repeats, "Subsampling repeats")->capture_default_str();
  }

  metrics::SamplingPlan plan(const MetricFlags& f) const {
    metrics::SamplingPlan p;
    p.sample_size = f.sample_size;
    p.repeats = f.repeats;
    p.seed = g_.seed;
    p.validate();
    return p;
  }

  void print_report(const recommend::SimilarityReport& r, const std::vector<Metric>& metrics) {
    std::vector<std::string> headers = {"RANK", "CANDIDATE"};
    for (auto m : metrics) headers.emplace_back(metrics::to_string(m));
    headers.emplace_back("RATIO");
    std::vector<std::vector<std::string>> rows;
    std::size_t rank = 0;
    for (const auto& id : r.final_order) {
      const auto& row = r.row(id);
      std::vector<std::string> cells = {std::to_string(++rank), id};
      for (auto m : metrics) cells.push_back(detail::fmt(row.metric_values.at(m).value));
      cells.push_back(detail::fmt(row.rank_sum_ratio));
      rows.push_back(std::move(cells));
    }
    out_ << "target: " << r.target_dataset_id << '\n';
    detail::print_table(out_, headers, rows);
    for (const auto& d : r.dropped) out_ << "dropped " << d.candidate_id << ": " << d.reason << '\n';
  }

  void add_similarity(CLI::App& app) {
    auto* sim = app.add_subcommand("similarity", "Dataset similarity from embeddings");
    auto f = std::make_shared<MetricFlags>();
    auto a = std::make_shared<std::string>();
    auto b = std::make_shared<std::string>();
    auto target = std::make_shared<std::string>();
    auto candidates = std::make_shared<std::string>();
    sim->add_option("--a", *a, "First EMB1 file");
    sim->add_option("--b", *b, "Second EMB1 file");
    sim->add_option("--target", *target, "Target dataset id (registry mode)");
    sim->add_option("--candidates", *candidates, "Comma list of candidate ids (default: same task and domain)");
    add_metric_flags(sim, *f, true);
    on(sim, [=, this] {
      const auto metric_list = detail::parse_metrics(f->metrics);
      if (!a->empty() || !b->empty()) {
        require(!a->empty() && !b->empty(), "--a and --b go together");
        require(target->empty(), "use either --a/--b or --target");
        const auto x = read_embedding(*a);
        const auto y = read_embedding(*b);
        json values = json::object();
        for (auto m : metric_list) {
          values[std::string(metrics::to_string(m))] =
              recommend::to_json_value(metrics::subsampled_metric(m, x, y, plan(*f), {}));
        }
        const json j = {{"a", *a}, {"b", *b}, {"metrics", values}};
        if (g_.json) {
          emit(j);
        } else {
          std::vector<std::vector<std::string>> rows;
          for (auto m : metric_list) {
            const auto& v = values[std::string(metrics::to_string(m))];
            rows.push_back({std::string(metrics::to_string(m)), detail::fmt(v.at("value")), v.at("direction")});
          }
          detail::print_table(out_, {"METRIC", "VALUE", "DIRECTION"}, rows);
        }
        return kExitOk;
      }
      require(!target->empty(), "give --a/--b or --target");
      auto reg = registry();
      auto cands = candidates->empty() ? recommend::candidates_in_category(reg, *target)
                                       : detail::split(*candidates, ',');
      require(!cands.empty(), "no candidate datasets for " + *target, ErrorKind::kNotFound);
      recommend::ComputedMetrics source(reg, plan(*f));
      const auto report = recommend::rank_candidates(*target, cands, metric_list,
                                                     detail::parse_weights(f->weights, metric_list), source, &err_);
      if (g_.json) {
        emit(recommend::to_json_value(report));
      } else {
        print_report(report, metric_list);
      }
      return kExitOk;
    });
  }

  struct Scenario {
    std::unique_ptr<recommend::MetricSource> source;
    std::unique_ptr<recommend::FixtureTable> fixture;
    recommend::ExperimentIndex index;
    std::vector<std::string> datasets;
    std::vector<Metric> metrics;
  };

  // Fixture mode (offline tables) or registry mode (live metrics).
  Scenario scenario(const std::string& fixture, const MetricFlags& f, bool metrics_given,
                    std::optional<Registry>& reg) const {
    Scenario s;
    if (!fixture.empty()) {
      auto table = std::make_unique<recommend::FixtureTable>(
          recommend::FixtureTable::load(detail::resolve_data_file(fixture)));
      s.index = recommend::ExperimentIndex::from_fixture(*table);
      for (const auto& d : table->datasets()) s.datasets.push_back(d);
      if (metrics_given) {
        s.metrics = detail::parse_metrics(f.metrics);
      } else {
        for (auto m : metrics::kAllMetrics) {
          if (table->has_metric(m)) s.metrics.push_back(m);
        }
        require(!s.metrics.empty(), "fixture has no metric tables", ErrorKind::kFormat);
      }
      s.source = std::move(table);
      return s;
    }
    reg.emplace(resolve_registry_root(g_.registry_root));
    s.index = recommend::ExperimentIndex::from_registry(*reg);
    for (const auto& d : reg->list<DatasetRecord>()) {
      if (d.embedding_ref) s.datasets.push_back(d.id);
    }
    s.metrics = detail::parse_metrics(f.metrics);
    s.source = std::make_unique<recommend::ComputedMetrics>(*reg, plan(f));
    return s;
  }

  void add_recommend(CLI::App& app) {
    auto* rec = app.add_subcommand("recommend", "Recommend a model for a target dataset");
    auto f = std::make_shared<MetricFlags>();
    auto target = std::make_shared<std::string>();
    auto desired = std::make_shared<std::string>("f1");
    auto fixture = std::make_shared<std::string>();
    rec->add_option("--target", *target, "Target dataset id")->required();
    rec->add_option("--desired-metric", *desired, "precision | recall | f1")->capture_default_str();
    rec->add_option("--fixture", *fixture, "Pairwise metric tables + results (e.g. paper_tables.json)");
    add_metric_flags(rec, *f, true);
    auto* metrics_opt = rec->get_option("--metrics");
    on(rec, [=, this] {
      const DesiredMetric dm = parse_desired_metric(*desired);
      std::optional<Registry> reg;
      auto s = scenario(*fixture, *f, metrics_opt->count() > 0, reg);
      std::vector<std::string> cands;
      if (fixture->empty()) {
        cands = recommend::candidates_in_category(*reg, *target);
      } else {
        require(std::find(s.datasets.begin(), s.datasets.end(), *target) != s.datasets.end(),
                "fixture has no dataset '" + *target + "'", ErrorKind::kNotFound);
        for (const auto& d : s.datasets) {
          if (d != *target) cands.push_back(d);
        }
      }
      require(!cands.empty(), "no candidate datasets for " + *target, ErrorKind::kNotFound);
      const auto report = recommend::rank_candidates(*target, cands, s.metrics,
                                                     detail::parse_weights(f->weights, s.metrics), *s.source, &err_);
      const auto r = recommend::recommend(*target, dm, report, s.index);
      if (g_.json) {
        auto j = recommend::to_json_value(r);
        j["similarity"] = recommend::to_json_value(report);
        emit(j);
      } else {
        out_ << "recommended model: " << r.model_id << '\n'
             << "nearest neighbor:  " << r.neighbor_dataset_id << " (" << to_string(dm) << " "
             << detail::fmt(r.neighbor_metric_value) << ")\n";
        if (!r.skipped_neighbors.empty()) {
          out_ << "skipped (no completed experiments):";
          for (const auto& n : r.skipped_neighbors) out_ << ' ' << n;
          out_ << '\n';
        }
        print_report(report, s.metrics);
      }
      return kExitOk;
    });
  }

  void add_accuracy(CLI::App& app) {
    auto* acc = app.add_subcommand("accuracy", "Leave-one-out recommendation accuracy");
    auto f = std::make_shared<MetricFlags>();
    auto fixture = std::make_shared<std::string>();
    auto desired = std::make_shared<std::string>("precision,recall,f1");
    acc->add_option("--fixture", *fixture, "Pairwise metric tables + results");
    acc->add_option("--desired-metrics", *desired, "Comma list of precision, recall, f1")->capture_default_str();
    add_metric_flags(acc, *f, true);
    auto* metrics_opt = acc->get_option("--metrics");
    on(acc, [=, this] {
      std::optional<Registry> reg;
      auto s = scenario(*fixture, *f, metrics_opt->count() > 0, reg);
      std::vector<DesiredMetric> dms;
      for (const auto& d : detail::split(*desired, ',')) dms.push_back(parse_desired_metric(d));
      const auto report = recommend::evaluate_accuracy(s.datasets, s.index, *s.source, s.metrics,
                                                       detail::parse_weights(f->weights, s.metrics), dms, &err_);
      if (g_.json) {
        emit(recommend::to_json_value(report));
        return kExitOk;
      }
      std::vector<std::vector<std::string>> rows;
      for (const auto& c : report.cases) {
        rows.push_back({c.target, std::string(to_string(c.desired)), c.neighbor, c.recommended, c.gold,
                        c.hit ? "yes" : "no"});
      }
      detail::print_table(out_, {"TARGET", "METRIC", "NEIGHBOR", "RECOMMENDED", "GOLD", "HIT"}, rows);
      out_ << "accuracy: " << report.total_hits << "/" << report.total << " = "
           << detail::fmt(report.accuracy()) << '\n';
      return kExitOk;
    });
  }

  // ---- experiments --------------------------------------------------------

  void print_record(const ExperimentRecord& r) {
    out_ << "experiment " << r.id << ": " << to_string(r.status) << '\n'
         << "  dataset " << r.dataset_id << ", model " << r.model_id << '\n';
    if (r.metrics) {
      out_ << "  precision " << detail::fmt(r.metrics->precision) << ", recall "
           << detail::fmt(r.metrics->recall) << ", f1 " << detail::fmt(r.metrics->f1) << '\n';
    }
    if (!r.history.empty()) out_ << "  epochs " << r.history.size() << '\n';
    if (r.artifact_path) out_ << "  artifact " << *r.artifact_path << '\n';
    if (r.error) out_ << "  error " << *r.error << '\n';
  }

  void add_experiment(CLI::App& app) {
    auto* ex = app.add_subcommand("experiment", "Run and inspect experiments");
    ex->require_subcommand(1);
    auto* run = ex->add_subcommand("run", "Run an experiment from a YAML or JSON config");
    auto config = std::make_shared<std::string>();
    auto id = std::make_shared<std::string>();
    run->add_option("--config", *config, "Config file")->required();
    run->add_option("--id", *id, "Experiment id (default: next exp-NNNN)");
    on(run, [=, this] {
      const auto cfg = train::load_config(*config);
      auto reg = registry();
      const auto callbacks = pipeline::builtin_callbacks();
      train::TrainerOptions opt;
      if (!id->empty()) opt.experiment_id = *id;
      const auto rec = train::run_experiment(reg, callbacks, cfg, opt);
      if (g_.json) {
        emit(json(rec));
      } else {
        print_record(rec);
      }
      return rec.status == ExperimentStatus::kCompleted ? kExitOk : kExitDomain;
    });
    auto* status = ex->add_subcommand("status", "Show one experiment");
    auto sid = std::make_shared<std::string>();
    status->add_option("id", *sid, "Experiment id")->required();
    on(status, [=, this] {
      const auto rec = registry().experiment(*sid);
      if (g_.json) {
        emit(json(rec));
      } else {
        print_record(rec);
      }
      return kExitOk;
    });
    auto* list = ex->add_subcommand("list", "List experiments");
    auto dataset = std::make_shared<std::string>();
    list->add_option("--dataset", *dataset, "Only this dataset");
    on(list, [=, this] {
      const auto reg = registry();
      const auto items = dataset->empty() ? reg.list<ExperimentRecord>() : reg.experiments_for_dataset(*dataset);
      if (g_.json) {
        emit(json(items));
        return kExitOk;
      }
      std::vector<std::vector<std::string>> rows;
      for (const auto& e : items) {
        rows.push_back({e.id, e.dataset_id, e.model_id, std::string(to_string(e.status)),
                        e.metrics ? detail::fmt(e.metrics->f1) : "-"});
      }
      detail::print_table(out_, {"ID", "DATASET", "MODEL", "STATUS", "F1"}, rows);
      return kExitOk;
    });
  }

  // ---- services -----------------------------------------------------------

  void announce(const std::string& role, const sched::net::Endpoint& ep) {
    if (g_.json) {
      out_ << json{{"role", role}, {"endpoint", ep.str()}}.dump() << std::endl;
    } else {
      out_ << role << " listening on " << ep.str() << std::endl;
    }
  }

  void add_serve(CLI::App& app) {
    auto* serve = app.add_subcommand("serve", "Run a scheduler service until SIGINT/SIGTERM");
    serve->require_subcommand(1);

    auto* gw = serve->add_subcommand("gateway", "Service gateway");
    auto machines = std::make_shared<std::string>();
    auto gw_listen = std::make_shared<std::string>("127.0.0.1:7070");
    gw->add_option("--machines", *machines, "JSON file: [{machine_id, weight, address}]")->required();
    gw->add_option("--listen", *gw_listen, "host:port")->capture_default_str();
    on(gw, [=, this] {
      std::ifstream in(*machines);
      if (!in) fail(ErrorKind::kIo, "cannot open " + *machines);
      sched::GatewayOptions o;
      o.machines = sched::load_machines(json::parse(in));
      o.listen = sched::net::parse_endpoint(*gw_listen);
      auto signals = detail::block_stop_signals();
      sched::Gateway gateway(o);
      gateway.start();
      announce("gateway", gateway.endpoint());
      detail::wait_for_signal(signals);
      gateway.stop();
      return kExitOk;
    });

    auto* ai = serve->add_subcommand("aiserver", "AI server with one worker per GPU");
    auto workers = std::make_shared<std::size_t>(1);
    auto machine_id = std::make_shared<std::string>("m0");
    auto ai_listen = std::make_shared<std::string>("127.0.0.1:7071");
    auto crashed = std::make_shared<std::string>();
    ai->add_option("--workers", *workers, "Worker count (one per GPU)")->required()->check(CLI::PositiveNumber);
    ai->add_option("--machine-id", *machine_id, "Machine id reported to the gateway")->capture_default_str();
    ai->add_option("--listen", *ai_listen, "host:port")->capture_default_str();
    ai->add_option("--crashed", *crashed, "Comma list of worker indices to treat as crashed");
    on(ai, [=, this] {
      sched::AiServerOptions o;
      o.machine_id = *machine_id;
      o.workers = *workers;
      for (const auto& w : detail::split(*crashed, ',')) o.crashed_workers.push_back(std::stoul(w));
      o.listen = sched::net::parse_endpoint(*ai_listen);
      auto reg = std::make_shared<Registry>(resolve_registry_root(g_.registry_root));
      auto mu = std::make_shared<std::mutex>();
      auto callbacks = std::make_shared<pipeline::CallbackRegistry>(pipeline::builtin_callbacks());
      const std::string mid = *machine_id;
      o.executor = [reg, mu, callbacks, mid](const sched::TaskEnvelope& env, std::size_t worker) {
        const auto cfg = env.config.get<train::ExperimentConfig>();
        train::TrainerOptions t;
        t.experiment_id = env.task_id;
        t.assigned_machine = mid;
        t.assigned_worker = "w" + std::to_string(worker);
        t.registry_mutex = mu.get();
        const auto rec = train::run_experiment(*reg, *callbacks, cfg, t);
        return sched::ExecOutcome{rec.status == ExperimentStatus::kCompleted, json(rec), rec.error.value_or("")};
      };
      auto signals = detail::block_stop_signals();
      sched::AiServer server(o);
      server.start();
      announce("aiserver", server.endpoint());
      detail::wait_for_signal(signals);
      server.stop();
      return kExitOk;
    });
  }

  std::string gateway_address(const std::string& flag) const {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv(kGatewayEnv)) return env;
    return "127.0.0.1:7070";
  }

  void print_envelope(const sched::TaskEnvelope& e) {
    out_ << "task " << e.task_id << ": " << to_string(e.state);
    if (e.machine_id) out_ << " on " << *e.machine_id;
    if (e.worker) out_ << "/w" << *e.worker;
    out_ << '\n';
    if (e.error) out_ << "  error " << *e.error << '\n';
  }

  void add_submit_status(CLI::App& app) {
    auto* submit = app.add_subcommand("submit", "Submit an experiment config to the gateway");
    auto config = std::make_shared<std::string>();
    auto gateway = std::make_shared<std::string>();
    auto task_id = std::make_shared<std::string>();
    submit->add_option("--config", *config, "YAML or JSON experiment config")->required();
    submit->add_option("--gateway", *gateway, "Gateway host:port (default: $KXOPS_GATEWAY or 127.0.0.1:7070)");
    submit->add_option("--task-id", *task_id, "Task id (default: assigned by the gateway)");
    on(submit, [=, this] {
      const auto cfg = train::load_config(*config);
      cfg.validate();
      sched::GatewayClient client(sched::net::parse_endpoint(gateway_address(*gateway)));
      const auto id = client.submit(json(cfg), task_id->empty() ? std::nullopt : std::optional(*task_id));
      if (g_.json) {
        emit({{"task_id", id}});
      } else {
        out_ << id << '\n';
      }
      return kExitOk;
    });

    auto* status = app.add_subcommand("status", "Show a task tracked by the gateway");
    auto id = std::make_shared<std::string>();
    auto gw2 = std::make_shared<std::string>();
    status->add_option("task_id", *id, "Task id")->required();
    status->add_option("--gateway", *gw2, "Gateway host:port");
    on(status, [=, this] {
      sched::GatewayClient client(sched::net::parse_endpoint(gateway_address(*gw2)));
      const auto env = client.status(*id);
      if (g_.json) {
        emit(json(env));
      } else {
        print_envelope(env);
      }
      return kExitOk;
    });
  }

  void add_simulate(CLI::App& app) {
    auto* sim = app.add_subcommand("simulate", "Discrete-event run of gateway, servers and workers");
    auto cluster = std::make_shared<std::string>();
    auto trace = std::make_shared<std::string>();
    auto random_tasks = std::make_shared<std::size_t>(0);
    sim->add_option("--cluster", *cluster, "JSON {machines: [{machine_id, weight, workers, crashed_workers?, down?}]}");
    sim->add_option("--trace", *trace, "JSON [{task_id, arrival, duration, fail?}]");
    sim->add_option("--random", *random_tasks, "Generate a random cluster and trace with this many tasks (uses --seed)");
    on(sim, [=, this] {
      sched::ClusterSpec spec;
      std::vector<sched::TraceTask> tasks;
      if (*random_tasks > 0) {
        require(cluster->empty() && trace->empty(), "--random replaces --cluster/--trace");
        Rng rng(g_.seed);
        spec = sched::random_cluster(rng);
        tasks = sched::random_trace(rng, *random_tasks);
      } else {
        require(!cluster->empty() && !trace->empty(), "give --cluster and --trace, or --random N");
        auto load = [](const std::string& p) {
          std::ifstream in(p);
          if (!in) fail(ErrorKind::kIo, "cannot open " + p);
          try {
            return json::parse(in);
          } catch (const json::parse_error& e) {
            fail(ErrorKind::kFormat, p + ": " + e.what());
          }
        };
        spec = load(*cluster).get<sched::ClusterSpec>();
        const auto tj = load(*trace);
        tasks = (tj.is_object() ? tj.at("tasks") : tj).get<std::vector<sched::TraceTask>>();
      }
      const auto r = sched::simulate(spec, tasks);
      if (g_.json) {
        json envs = json::array();
        for (const auto& [_, e] : r.tasks) envs.push_back(e);
        emit({{"cluster", spec},
              {"events", r.log},
              {"tasks", envs},
              {"machines", r.machines},
              {"checks", {{"conservation", r.conservation_held},
                          {"max_running_per_worker", r.max_running_per_worker}}}});
        return kExitOk;
      }
      for (const auto& e : r.log) {
        out_ << "t=" << e.time << "  " << std::left << std::setw(12) << e.kind << e.task_id;
        if (e.machine_id) out_ << "  " << *e.machine_id;
        if (e.worker) out_ << "/w" << *e.worker;
        out_ << '\n';
      }
      std::size_t done = 0, failed = 0;
      for (const auto& [_, e] : r.tasks) (e.state == sched::TaskState::kDone ? done : failed) += 1;
      out_ << done << " done, " << failed << " failed\n";
      return kExitOk;
    });
  }

  std::ostream& out_;
  std::ostream& err_;
  Globals g_;
  std::function<int()> action_;
};

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return App(out, err).run(args);
}

}  // namespace kxops::cli
