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

#include <concepts>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <utility>
#include <vector>

#include "kxops/core/error.hpp"
#include "kxops/pipeline/loader.hpp"
#include "kxops/train/evaluator.hpp"

namespace kxops::train {

using pipeline::Batch;

// What the trainer needs from any model.
template <typename T>
concept AdapterModel = requires(T& m, const T& cm, const Batch& b, const std::filesystem::path& p,
                                std::uint64_t seed) {
  m.initialize(seed);
  m.load(p);
  { m.train_step(b) } -> std::convertible_to<double>;
  { m.decode(b) } -> std::convertible_to<std::vector<PredOutput>>;
  cm.save(p);
};

// Optional overrides the trainer looks for before falling back to defaults.
template <typename T>
concept HasCustomTrainStep = requires(T& m, const Batch& b) {
  { m.custom_train_step(b) } -> std::convertible_to<double>;
};

template <typename T>
concept HasCustomLoss = requires(T& m, const Batch& b) {
  { m.custom_loss(b) } -> std::convertible_to<double>;
};

template <typename T>
concept HasCustomEval = requires(T& m, const std::vector<AnnotatedDocument>& gold,
                                 const std::vector<PredOutput>& pred, Task task) {
  { m.custom_eval(gold, pred, task) } -> std::convertible_to<Scores>;
};

class ModelAdapter {
 public:
  virtual ~ModelAdapter() = default;

  virtual void initialize(std::uint64_t seed) = 0;
  virtual void load(const std::filesystem::path& path) = 0;
  virtual double train_step(const Batch& batch) = 0;
  virtual std::vector<PredOutput> decode(const Batch& batch) = 0;
  virtual void save(const std::filesystem::path& path) const = 0;

  virtual bool has_custom_train_step() const { return false; }
  virtual bool has_custom_loss() const { return false; }
  virtual bool has_custom_eval() const { return false; }

  virtual double custom_train_step(const Batch&) { unsupported("custom_train_step"); }
  virtual double custom_loss(const Batch&) { unsupported("custom_loss"); }
  virtual Scores custom_eval(const std::vector<AnnotatedDocument>&, const std::vector<PredOutput>&,
                             Task) {
    unsupported("custom_eval");
  }

 private:
  [[noreturn]] static void unsupported(const char* what) {
    fail(ErrorKind::kUnavailable, std::string("adapter has no ") + what);
  }
};

// Wraps any AdapterModel; the optional hooks are discovered at compile time.
template <AdapterModel T>
class AdapterBox final : public ModelAdapter {
 public:
  template <typename... Args>
  explicit AdapterBox(Args&&... args) : model_(std::forward<Args>(args)...) {}

  T& model() noexcept { return model_; }
  const T& model() const noexcept { return model_; }

  void initialize(std::uint64_t seed) override { model_.initialize(seed); }
  void load(const std::filesystem::path& path) override { model_.load(path); }
  double train_step(const Batch& batch) override { return model_.train_step(batch); }
  std::vector<PredOutput> decode(const Batch& batch) override { return model_.decode(batch); }
  void save(const std::filesystem::path& path) const override { model_.save(path); }

  bool has_custom_train_step() const override { return HasCustomTrainStep<T>; }
  bool has_custom_loss() const override { return HasCustomLoss<T>; }
  bool has_custom_eval() const override { return HasCustomEval<T>; }

  double custom_train_step(const Batch& batch) override {
    if constexpr (HasCustomTrainStep<T>) return model_.custom_train_step(batch);
    return ModelAdapter::custom_train_step(batch);
  }
  double custom_loss(const Batch& batch) override {
    if constexpr (HasCustomLoss<T>) return model_.custom_loss(batch);
    return ModelAdapter::custom_loss(batch);
  }
  Scores custom_eval(const std::vector<AnnotatedDocument>& gold, const std::vector<PredOutput>& pred,
                     Task task) override {
    if constexpr (HasCustomEval<T>) return model_.custom_eval(gold, pred, task);
    return ModelAdapter::custom_eval(gold, pred, task);
  }

 private:
  T model_;
};

template <AdapterModel T, typename... Args>
std::unique_ptr<ModelAdapter> make_adapter(Args&&... args) {
  return std::make_unique<AdapterBox<T>>(std::forward<Args>(args)...);
}

}  // namespace kxops::train
