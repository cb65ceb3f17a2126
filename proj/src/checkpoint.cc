// Copyright 2026 The CFAG Authors.
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

#include "cfag/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>

#include "cfag/errors.h"

namespace cfag {
namespace {

constexpr char kMagic[8] = {'C', 'F', 'A', 'G', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  uint64_t bits = 0;
  if constexpr (sizeof(T) == 8) {
    bits = std::bit_cast<uint64_t>(value);
  } else {
    bits = static_cast<uint64_t>(value);
  }
  for (size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::filesystem::path& path) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw DataError("checkpoint truncated: " + path.string());
  }
  uint64_t bits = 0;
  for (size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<uint64_t>(bytes[i]) << (8 * i);
  }
  if constexpr (sizeof(T) == 8) {
    return std::bit_cast<T>(bits);
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path,
                      std::span<const NamedMatrix> matrices) {
  for (const auto& nm : matrices) check_finite(nm.value, nm.name);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put_le<uint32_t>(out, kCheckpointVersion);
  put_le<uint32_t>(out, static_cast<uint32_t>(matrices.size()));
  for (const auto& nm : matrices) {
    put_le<uint32_t>(out, static_cast<uint32_t>(nm.name.size()));
    out.write(nm.name.data(), static_cast<std::streamsize>(nm.name.size()));
    put_le<uint64_t>(out, static_cast<uint64_t>(nm.value.rows()));
    put_le<uint64_t>(out, static_cast<uint64_t>(nm.value.cols()));
    for (Eigen::Index r = 0; r < nm.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < nm.value.cols(); ++c) {
        put_le<double>(out, nm.value(r, c));
      }
    }
  }
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

std::vector<NamedMatrix> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a CFAG checkpoint: " + path.string());
  }
  const auto version = get_le<uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) +
                    ": " + path.string());
  }
  const auto count = get_le<uint32_t>(in, path);
  std::vector<NamedMatrix> matrices;
  matrices.reserve(count);
  for (uint32_t k = 0; k < count; ++k) {
    const auto name_len = get_le<uint32_t>(in, path);
    if (name_len > 4096) throw DataError("corrupt checkpoint: " + path.string());
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) {
      throw DataError("checkpoint truncated: " + path.string());
    }
    const auto rows = get_le<uint64_t>(in, path);
    const auto cols = get_le<uint64_t>(in, path);
    if (rows > (1ull << 31) || cols > (1ull << 31)) {
      throw DataError("corrupt checkpoint shape: " + path.string());
    }
    DenseMatrix value(static_cast<Eigen::Index>(rows),
                      static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        value(r, c) = get_le<double>(in, path);
      }
    }
    matrices.push_back({std::move(name), std::move(value)});
  }
  return matrices;
}

}  // namespace cfag
