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

#ifndef CFAG_CHECKPOINT_H_
#define CFAG_CHECKPOINT_H_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cfag/numeric.h"

namespace cfag {

struct NamedMatrix {
  std::string name;
  DenseMatrix value;
};

// Binary layout, all integers and floats little-endian:
//
//   char[8]  magic "CFAGCKPT"
//   u32      format version (kCheckpointVersion)
//   u32      matrix count
//   per matrix:
//     u32    name length, then that many name bytes
//     u64    rows
//     u64    cols
//     f64    rows * cols values, row-major
inline constexpr uint32_t kCheckpointVersion = 1;

// Throws NumericError if a matrix holds NaN/Inf, DataError on I/O failure.
void write_checkpoint(const std::filesystem::path& path,
                      std::span<const NamedMatrix> matrices);

// Throws DataError on I/O failure, bad magic, unknown version or truncation.
std::vector<NamedMatrix> read_checkpoint(const std::filesystem::path& path);

}  // namespace cfag

#endif  // CFAG_CHECKPOINT_H_
