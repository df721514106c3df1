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

#include "ftn/enhancement.hpp"

#include "ftn/errors.hpp"

namespace ftn {

FuseParams make_fuse(ParameterStore& store, const std::string& name, int channels) {
  return FuseParams{make_linear(store, name + ".conv", channels, channels), make_batch_norm(store, name + ".bn", channels)};
}

TokenGrid fuse(const TokenGrid& e1, const TokenGrid& e2, FuseMode mode, const FuseParams& p, bool training) {
  if (e1.values.shape() != e2.values.shape() || e1.stride != e2.stride) {
    throw InvalidInput("fuse: feature grids differ " + shape_string(e1.values.shape()) + " vs " +
                       shape_string(e2.values.shape()));
  }
  Var mixed = mode == FuseMode::sum ? ops::add(e1.values, e2.values) : ops::sub(e1.values, e2.values);
  return TokenGrid{ops::relu(p.bn(p.conv(mixed), training)), e1.stride};
}

TokenGrid contrast(const TokenGrid& e) {
  Var local = ops::sub(e.values, ops::avg_pool3x3(e.values));
  return TokenGrid{ops::concat_channels({e.values, local}), e.stride};
}

Enhancer::Enhancer(ParameterStore& store, int channels, const std::string& prefix) {
  for (int k = 0; k < kPyramidLevels; ++k) {
    const std::string level = prefix + "." + std::to_string(k);
    sum_[static_cast<std::size_t>(k)] = make_fuse(store, level + ".sum", channels);
    diff_[static_cast<std::size_t>(k)] = make_fuse(store, level + ".diff", channels);
  }
}

std::vector<EnhancedLevel> Enhancer::enhance_pyramid(const FeaturePyramid& a, const FeaturePyramid& b,
                                                     bool training) const {
  std::vector<EnhancedLevel> out;
  for (int k = 0; k < kPyramidLevels; ++k) {
    const auto i = static_cast<std::size_t>(k);
    if (a[i].values.shape() != b[i].values.shape() || a[i].stride != b[i].stride) {
      throw InvalidInput("enhance_pyramid: level " + std::to_string(k + 1) + " not aligned between branches");
    }
    out.push_back(EnhancedLevel{contrast(fuse(a[i], b[i], FuseMode::sum, sum_[i], training)),
                                contrast(fuse(a[i], b[i], FuseMode::diff, diff_[i], training)), k + 1});
  }
  return out;
}

}  // namespace ftn
