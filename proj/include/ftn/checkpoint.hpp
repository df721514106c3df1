/*
 * Copyright (c) 2026, The FTN-CD Authors.  All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Single-file checkpoint container.
//
//   magic    8 bytes  "FTNCKPT\0"
//   version  u32
//   meta     u64 length + UTF-8 text, one key=value per line
//   count    u64
//   tensors  count x { u32 name length, name, u32 rank, i32 dims[rank],
//                      f64 values[numel] }
//
// Integers and doubles are little-endian.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ftn/params.hpp"
#include "ftn/tensor.hpp"

namespace ftn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::map<std::string, std::string> metadata;
  std::vector<NamedTensor> tensors;

  const Tensor* find(const std::string& name) const;
};

/// Writes to a sibling temporary and renames, so a crash never leaves a
/// truncated checkpoint behind.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws IngestionError on a bad magic, unknown version or truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Every parameter of the store, running statistics included.
std::vector<NamedTensor> snapshot_parameters(const ParameterStore& store);
/// Copies values into existing parameters; names must match and shapes
/// must agree. Returns the number of tensors restored.
std::size_t restore_parameters(ParameterStore& store, const Checkpoint& ckpt, bool require_all = true);

}  // namespace ftn
