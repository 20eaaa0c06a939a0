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

#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "kxops/core/error.hpp"
#include "kxops/core/records.hpp"
#include "kxops/core/registry.hpp"
#include "kxops/pipeline/callbacks.hpp"
#include "kxops/pipeline/loader.hpp"
#include "kxops/train/adapter.hpp"
#include "kxops/train/config.hpp"
#include "kxops/train/evaluator.hpp"
#include "kxops/train/experiment_log.hpp"
#include "kxops/train/gazetteer.hpp"

namespace kxops::train {

using AdapterFactory = std::function<std::unique_ptr<ModelAdapter>(const ModelRecord&)>;

inline AdapterFactory gazetteer_factory() {
  return [](const ModelRecord& m) { return make_adapter<GazetteerModel>(m.task); };
}

struct TrainerOptions {
  std::optional<std::string> experiment_id;
  AdapterFactory factory = gazetteer_factory();
  std::optional<std::string> assigned_machine;
  std::optional<std::string> assigned_worker;
  // Guards registry access when several trainers share one Registry.
  std::mutex* registry_mutex = nullptr;
};

inline std::filesystem::path experiment_log_path(const std::filesystem::path& root,
                                                 const std::string& id) {
  return root / "logs" / (id + ".jsonl");
}

inline std::filesystem::path artifact_path(const std::filesystem::path& root, const std::string& id) {
  return root / "artifacts" / (id + ".json");
}

namespace detail {

class MaybeLock {
 public:
  explicit MaybeLock(std::mutex* m) : m_(m) {
    if (m_) m_->lock();
  }
  ~MaybeLock() {
    if (m_) m_->unlock();
  }
  MaybeLock(const MaybeLock&) = delete;
  MaybeLock& operator=(const MaybeLock&) = delete;

 private:
  std::mutex* m_;
};

inline std::string next_experiment_id(const Registry& registry) {
  for (std::size_t n = registry.list<ExperimentRecord>().size() + 1;; ++n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "exp-%04zu", n);
    if (!registry.contains<ExperimentRecord>(buf)) return buf;
  }
}

}  // namespace detail

// Checks that can reject a config before any record exists.
inline void check_config(const Registry& registry, const ExperimentConfig& config) {
  config.validate();
  const auto ds = registry.dataset(config.dataset_id);
  const auto model = registry.model(config.model_id);
  if (ds.task != model.task) {
    fail(ErrorKind::kInvalidArgument, "dataset " + ds.id + " is " + std::string(to_string(ds.task)) +
                                          " but model " + model.id + " is " +
                                          std::string(to_string(model.task)));
  }
}

class Trainer {
 public:
  Trainer(Registry& registry, const pipeline::CallbackRegistry& callbacks, TrainerOptions options = {})
      : registry_(registry), callbacks_(callbacks), options_(std::move(options)) {}

  // parse -> load or initialize -> build loader -> query hooks -> epoch loop.
  // Failures after the record exists leave it FAILED with the error captured.
  ExperimentRecord run(const ExperimentConfig& config) {
    DatasetRecord dataset;
    ModelRecord model;
    ExperimentRecord rec;
    {
      detail::MaybeLock lock(options_.registry_mutex);
      check_config(registry_, config);
      dataset = registry_.dataset(config.dataset_id);
      model = registry_.model(config.model_id);
      rec.id = options_.experiment_id.value_or(detail::next_experiment_id(registry_));
      rec.dataset_id = config.dataset_id;
      rec.model_id = config.model_id;
      rec.hyperparams = config.hyperparams;
      rec.created_at = now_ms();
      rec.assigned_machine = options_.assigned_machine;
      rec.assigned_worker = options_.assigned_worker;
      registry_.put(rec);
    }
    ExperimentLog log(experiment_log_path(registry_.root(), rec.id), rec.id);
    log.append("created", json(config));
    advance(rec, ExperimentStatus::kQueued, log);
    advance(rec, ExperimentStatus::kRunning, log);

    try {
      execute(config, dataset, model, rec, log);
      const auto final_scores = rec.history.back();
      rec.complete(final_scores, now_ms());
      persist(rec);
      log.append("completed", {{"metrics", final_scores}, {"artifact", *rec.artifact_path}});
    } catch (const std::exception& e) {
      rec.mark_failed(e.what(), now_ms());
      persist(rec);
      log.append("failed", {{"error", e.what()}});
    }
    return rec;
  }

 private:
  void persist(const ExperimentRecord& rec) {
    detail::MaybeLock lock(options_.registry_mutex);
    registry_.update(rec);
  }

  void advance(ExperimentRecord& rec, ExperimentStatus to, ExperimentLog& log) {
    rec.transition(to);
    persist(rec);
    log.append("status", {{"status", to_string(to)}});
  }

  static void hook(ExperimentRecord& rec, ExperimentLog& log, const std::string& site, bool custom,
                   json where) {
    const std::string path = custom ? "custom" : "default";
    rec.hooks[site] = path;
    where["site"] = site;
    where["path"] = path;
    log.append("hook", std::move(where));
  }

  Scores evaluate_model(ModelAdapter& adapter, const pipeline::Loader& eval_loader, Task task,
                        ExperimentRecord& rec, ExperimentLog& log, json where) {
    std::vector<AnnotatedDocument> gold;
    std::vector<PredOutput> preds;
    for (const auto& batch : eval_loader.epoch(0)) {
      auto out = adapter.decode(batch);
      require(out.size() == batch.size(), "decode returned " + std::to_string(out.size()) +
                                              " outputs for a batch of " + std::to_string(batch.size()),
              ErrorKind::kFormat);
      for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& doc = batch.documents[i];
        validate(out[i], pipeline::utf8::length(doc.text), doc.entities.size());
        gold.push_back(doc);
        preds.push_back(std::move(out[i]));
      }
    }
    const bool custom = adapter.has_custom_eval();
    hook(rec, log, "eval", custom, std::move(where));
    return custom ? adapter.custom_eval(gold, preds, task) : evaluate(gold, preds, task);
  }

  void execute(const ExperimentConfig& config, const DatasetRecord& dataset, const ModelRecord& model,
               ExperimentRecord& rec, ExperimentLog& log) {
    const std::uint64_t seed = config.seed();

    auto adapter = options_.factory(model);
    require(adapter != nullptr, "no adapter for model " + model.id, ErrorKind::kUnavailable);
    if (config.resume_from) {
      adapter->load(*config.resume_from);
      log.append("model_loaded", {{"path", *config.resume_from}});
    } else {
      adapter->initialize(seed);
      log.append("model_initialized", {{"seed", seed}});
    }

    pipeline::LoaderOptions lo;
    lo.batch_size = static_cast<std::size_t>(config.batch_size());
    lo.shuffle = config.flag("shuffle", false);
    pipeline::Loader train_loader = [&] {
      detail::MaybeLock lock(options_.registry_mutex);
      return pipeline::build_loader(registry_, callbacks_, dataset.id, model.id, lo, seed);
    }();
    auto eval_spec = train_loader.spec();
    eval_spec.shuffle = false;
    const pipeline::Loader eval_loader(callbacks_, train_loader.corpus(), eval_spec, seed);
    log.append("loader_built", {{"retrieval", eval_spec.retrieval},
                                {"feature_extractor", eval_spec.feature_extractor},
                                {"batch_size", eval_spec.batch_size}});

    log.append("capabilities", {{"custom_train_step", adapter->has_custom_train_step()},
                                {"custom_loss", adapter->has_custom_loss()},
                                {"custom_eval", adapter->has_custom_eval()}});

    if (config.resume_from) {
      const auto initial = evaluate_model(*adapter, eval_loader, dataset.task, rec, log, {{"epoch", 0}});
      log.append("initial_eval", {{"metrics", initial}});
    }

    const auto epochs = static_cast<std::uint64_t>(config.epochs());
    for (std::uint64_t e = 1; e <= epochs; ++e) {
      double loss_sum = 0.0;
      std::size_t steps = 0;
      for (const auto& batch : train_loader.epoch(e - 1)) {
        const json where = {{"epoch", e}, {"step", steps}};
        const bool custom_step = adapter->has_custom_train_step();
        hook(rec, log, "train_step", custom_step, where);
        double loss = custom_step ? adapter->custom_train_step(batch) : adapter->train_step(batch);
        const bool custom_loss = adapter->has_custom_loss();
        hook(rec, log, "loss", custom_loss, where);
        if (custom_loss) loss = adapter->custom_loss(batch);
        loss_sum += loss;
        ++steps;
      }
      const auto scores = evaluate_model(*adapter, eval_loader, dataset.task, rec, log, {{"epoch", e}});
      rec.history.push_back(scores);
      persist(rec);
      log.append("epoch_end", {{"epoch", e},
                               {"mean_loss", steps ? loss_sum / static_cast<double>(steps) : 0.0},
                               {"metrics", scores}});
    }

    const auto path = artifact_path(registry_.root(), rec.id);
    adapter->save(path);
    rec.artifact_path = path.string();
    log.append("model_saved", {{"path", path.string()}});
  }

  Registry& registry_;
  const pipeline::CallbackRegistry& callbacks_;
  TrainerOptions options_;
};

inline ExperimentRecord run_experiment(Registry& registry, const pipeline::CallbackRegistry& callbacks,
                                       const ExperimentConfig& config, TrainerOptions options = {}) {
  return Trainer(registry, callbacks, std::move(options)).run(config);
}

}  // namespace kxops::train
