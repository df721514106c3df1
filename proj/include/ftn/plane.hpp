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
#include <span>
#include <vector>

namespace ftn {

/// Row-major single-channel raster.
template <class T>
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<T> values;

  Plane() = default;
  Plane(int h, int w, T fill = T{}) : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}
  Plane(int h, int w, std::vector<T> v) : height(h), width(w), values(std::move(v)) {}

  std::size_t size() const { return values.size(); }
  T& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  bool same_size(int h, int w) const { return height == h && width == w; }
  template <class U>
  bool same_size(const Plane<U>& o) const {
    return height == o.height && width == o.width;
  }
  bool operator==(const Plane&) const = default;
};

/// Per-pixel change probability in [0, 1].
using ProbabilityMap = Plane<double>;
/// Binary change mask, 1 = changed.
using LabelMask = Plane<std::uint8_t>;

}  // namespace ftn
