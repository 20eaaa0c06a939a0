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

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kxops/core/error.hpp"

namespace kxops {

// Dense n_rows x dim matrix of float32 text embeddings, row-major. Immutable
// once constructed; every value is finite.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix(std::size_t n_rows, std::size_t dim, std::vector<float> data,
                  std::string source_model_id = {})
      : n_rows_(n_rows),
        dim_(dim),
        data_(std::move(data)),
        source_model_id_(std::move(source_model_id)) {
    require(n_rows_ >= 1, "embedding matrix needs at least one row");
    require(dim_ >= 1, "embedding matrix needs dim >= 1");
    require(data_.size() == n_rows_ * dim_,
            "embedding data size " + std::to_string(data_.size()) +
                " does not match " + std::to_string(n_rows_) + "x" +
                std::to_string(dim_));
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        fail(ErrorKind::kInvalidArgument,
             "non-finite embedding value at row " + std::to_string(i / dim_) +
                 ", column " + std::to_string(i % dim_));
      }
    }
  }

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const float> data() const noexcept { return data_; }
  const std::string& source_model_id() const noexcept {
    return source_model_id_;
  }

  std::span<const float> row(std::size_t i) const noexcept {
    return std::span<const float>(data_).subspan(i * dim_, dim_);
  }

  float operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * dim_ + j];
  }

  // New matrix made of the given rows, in the given order.
  EmbeddingMatrix select_rows(std::span<const std::size_t> rows) const {
    std::vector<float> out;
    out.reserve(rows.size() * dim_);
    for (std::size_t r : rows) {
      require(r < n_rows_, "row index out of range");
      auto src = row(r);
      out.insert(out.end(), src.begin(), src.end());
    }
    return EmbeddingMatrix(rows.size(), dim_, std::move(out), source_model_id_);
  }

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.n_rows_ == b.n_rows_ && a.dim_ == b.dim_ &&
           a.data_.size() == b.data_.size() &&
           std::memcmp(a.data_.data(), b.data_.data(),
                       a.data_.size() * sizeof(float)) == 0;
  }

 private:
  std::size_t n_rows_;
  std::size_t dim_;
  std::vector<float> data_;
  std::string source_model_id_;
};

// EMB1 on-disk layout (little-endian):
//   0..3   "EMB1"
//   4      version (1)
//   5      dtype (1 = float32)
//   6..7   reserved, zero
//   8..11  n_rows  (u32)
//   12..15 dim     (u32)
//   16..   n_rows * dim float32 values, row-major
namespace emb1 {

inline constexpr std::array<char, 4> kMagic = {'E', 'M', 'B', '1'};
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::uint8_t kDtypeFloat32 = 0x01;
inline constexpr std::size_t kHeaderSize = 16;

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline std::vector<unsigned char> encode(const EmbeddingMatrix& m) {
  require(m.n_rows() <= UINT32_MAX && m.dim() <= UINT32_MAX,
          "embedding matrix too large for EMB1");
  std::vector<unsigned char> out;
  out.reserve(kHeaderSize + m.data().size() * 4);
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  out.push_back(kVersion);
  out.push_back(kDtypeFloat32);
  out.push_back(0);
  out.push_back(0);
  detail::put_u32(out, static_cast<std::uint32_t>(m.n_rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(m.dim()));
  for (float v : m.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline EmbeddingMatrix decode(std::span<const unsigned char> bytes,
                              std::string source_model_id = {}) {
  if (bytes.size() < kHeaderSize) {
    fail(ErrorKind::kFormat, "EMB1 header truncated: " +
                                 std::to_string(bytes.size()) + " bytes");
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    fail(ErrorKind::kFormat, "bad EMB1 magic");
  }
  if (bytes[4] != kVersion) {
    fail(ErrorKind::kFormat,
         "unsupported EMB1 version " + std::to_string(bytes[4]));
  }
  if (bytes[5] != kDtypeFloat32) {
    fail(ErrorKind::kFormat, "unsupported EMB1 dtype " + std::to_string(bytes[5]));
  }
  if (bytes[6] != 0 || bytes[7] != 0) {
    fail(ErrorKind::kFormat, "EMB1 reserved bytes must be zero");
  }
  const std::uint64_t n = detail::get_u32(bytes.data() + 8);
  const std::uint64_t d = detail::get_u32(bytes.data() + 12);
  if (n == 0 || d == 0) {
    fail(ErrorKind::kFormat, "EMB1 declares an empty matrix");
  }
  const std::uint64_t expected = n * d * 4;
  const std::uint64_t actual = bytes.size() - kHeaderSize;
  if (actual != expected) {
    fail(ErrorKind::kFormat,
         (actual < expected ? "EMB1 payload truncated: " : "EMB1 payload has trailing bytes: ") +
             std::to_string(actual) + " bytes, expected " +
             std::to_string(expected) + " for " + std::to_string(n) + "x" +
             std::to_string(d));
  }
  std::vector<float> data(n * d);
  const unsigned char* p = bytes.data() + kHeaderSize;
  for (std::size_t i = 0; i < data.size(); ++i, p += 4) {
    data[i] = std::bit_cast<float>(detail::get_u32(p));
    if (!std::isfinite(data[i])) {
      fail(ErrorKind::kFormat, "EMB1 payload contains a non-finite value at row " +
                                   std::to_string(i / d));
    }
  }
  return EmbeddingMatrix(n, d, std::move(data), std::move(source_model_id));
}

}  // namespace emb1

inline void write_embedding(const EmbeddingMatrix& m,
                            const std::filesystem::path& path) {
  const auto bytes = emb1::encode(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
}

inline EmbeddingMatrix read_embedding(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return emb1::decode(bytes);
}

}  // namespace kxops
