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

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ftn {

/// Decoded PNG samples, interleaved, 1 (gray) or 3 (RGB) channels.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> samples;
};

/// Palette and low bit depths are expanded, alpha is dropped. 16-bit files
/// keep 16 bits unless `force_8bit` is set.
PngImage read_png(const std::filesystem::path& path, bool force_8bit = true);
void write_png(const std::filesystem::path& path, const PngImage& image);

}  // namespace ftn
