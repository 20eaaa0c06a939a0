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

#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "kxops/core/error.hpp"
#include "kxops/core/random.hpp"
#include "kxops/core/registry.hpp"
#include "kxops/pipeline/callbacks.hpp"

namespace kxops::pipeline {

struct PipelineSpec {
  std::string retrieval;
  std::vector<std::string> cleaners;
  std::string feature_extractor;
  std::size_t batch_size = 32;
  bool shuffle = false;

  void validate() const {
    require(!retrieval.empty(), "pipeline retrieval callback is not set");
    require(!feature_extractor.empty(), "pipeline feature extractor is not set");
    require(batch_size >= 1, "batch_size must be >= 1");
  }
};

struct Batch {
  std::vector<AnnotatedDocument> documents;  // cleaned, pre-extraction
  std::vector<ModelInput> inputs;            // same order as documents

  std::size_t size() const noexcept { return inputs.size(); }
};

class Loader {
 public:
  Loader(const CallbackRegistry& callbacks, std::filesystem::path corpus, PipelineSpec spec,
         std::uint64_t seed)
      : callbacks_(&callbacks), corpus_(std::move(corpus)), spec_(std::move(spec)), seed_(seed) {
    spec_.validate();
    // Resolve eagerly so a bad binding fails at construction.
    callbacks_->retrieval(spec_.retrieval);
    for (const auto& c : spec_.cleaners) callbacks_->cleaner(c);
    callbacks_->extractor(spec_.feature_extractor);
  }

  const PipelineSpec& spec() const noexcept { return spec_; }
  const std::filesystem::path& corpus() const noexcept { return corpus_; }

  // Retrieval then cleaning, in corpus order.
  std::vector<AnnotatedDocument> documents() const {
    std::vector<AnnotatedDocument> docs;
    try {
      docs = callbacks_->retrieval(spec_.retrieval)(corpus_);
    } catch (const Error& e) {
      fail(e.kind(), "retrieval '" + spec_.retrieval + "' on " + corpus_.string() + ": " + e.what());
    }
    for (auto& d : docs) {
      try {
        validate(d);
        d = apply_cleaners(std::move(d), spec_.cleaners, *callbacks_);
      } catch (const Error& e) {
        fail(e.kind(), "document " + d.doc_id + ": " + e.what());
      }
    }
    return docs;
  }

  // One pass over the corpus. Each document goes through every layer once.
  std::vector<Batch> epoch(std::uint64_t index = 0) const {
    auto docs = documents();
    std::vector<std::size_t> order(docs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (spec_.shuffle) Rng::split(seed_, index).shuffle(order);

    const auto& extract = callbacks_->extractor(spec_.feature_extractor);
    std::vector<Batch> batches;
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i % spec_.batch_size == 0) batches.emplace_back();
      auto& doc = docs[order[i]];
      ModelInput input;
      try {
        input = extract(doc);
      } catch (const Error& e) {
        fail(e.kind(), "document " + doc.doc_id + ": feature extractor '" +
                           spec_.feature_extractor + "': " + e.what());
      }
      batches.back().inputs.push_back(std::move(input));
      batches.back().documents.push_back(std::move(doc));
    }
    return batches;
  }

 private:
  const CallbackRegistry* callbacks_;
  std::filesystem::path corpus_;
  PipelineSpec spec_;
  std::uint64_t seed_;
};

struct LoaderOptions {
  std::vector<std::string> cleaners;
  std::size_t batch_size = 32;
  bool shuffle = false;
};

// Resolves the corpus path of a dataset record against the registry root.
inline std::filesystem::path corpus_path(const Registry& registry, const DatasetRecord& ds) {
  if (!ds.corpus_ref) fail(ErrorKind::kNotFound, "dataset " + ds.id + " has no corpus_ref");
  std::filesystem::path p(*ds.corpus_ref);
  return p.is_absolute() ? p : registry.root() / p;
}

// The spec comes from the records' bindings: the dataset names its retrieval
// callback and the model names its feature extractor.
inline PipelineSpec resolve_spec(const Registry& registry, const std::string& dataset_id,
                                 const std::string& model_id, const LoaderOptions& options) {
  const auto& ds = registry.dataset(dataset_id);
  const auto& model = registry.model(model_id);
  if (!ds.retrieval) fail(ErrorKind::kNotFound, "dataset " + dataset_id + " has no retrieval binding");
  if (!model.extractor) {
    fail(ErrorKind::kNotFound, "model " + model_id + " has no feature extractor binding");
  }
  PipelineSpec spec;
  spec.retrieval = *ds.retrieval;
  spec.cleaners = options.cleaners;
  spec.feature_extractor = *model.extractor;
  spec.batch_size = options.batch_size;
  spec.shuffle = options.shuffle;
  return spec;
}

inline Loader build_loader(const Registry& registry, const CallbackRegistry& callbacks,
                           const std::string& dataset_id, const std::string& model_id,
                           const LoaderOptions& options, std::uint64_t seed) {
  auto spec = resolve_spec(registry, dataset_id, model_id, options);
  return Loader(callbacks, corpus_path(registry, registry.dataset(dataset_id)), std::move(spec), seed);
}

}  // namespace kxops::pipeline
