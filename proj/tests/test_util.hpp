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

// Shared helpers for the kxops test suites.

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "kxops/core/embedding.hpp"

namespace kxops::testing {

// n x d Gaussian samples with unit variance around `mean` (zero-padded).
inline EmbeddingMatrix gaussian(std::size_t n, std::size_t d, std::uint64_t seed,
                                std::vector<double> mean = {}, double stddev = 1.0) {
  mean.resize(d, 0.0);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  std::vector<float> data(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      data[i * d + j] = static_cast<float>(mean[j] + normal(gen));
    }
  }
  return EmbeddingMatrix(n, d, std::move(data));
}

inline EmbeddingMatrix from_rows(const std::vector<std::vector<float>>& rows) {
  std::vector<float> data;
  for (const auto& r : rows) data.insert(data.end(), r.begin(), r.end());
  return EmbeddingMatrix(rows.size(), rows.front().size(), std::move(data));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  std::random_device rd;
  auto dir = std::filesystem::temp_directory_path() /
             ("kxops-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace kxops::testing
