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

#include <array>
#include <string>
#include <vector>

#include "ftn/backbone.hpp"

namespace ftn {

enum class FuseMode { sum, diff };

struct FuseParams {
  Linear conv;  // 1x1, C -> C
  BatchNorm bn;
};
FuseParams make_fuse(ParameterStore& store, const std::string& name, int channels);

/// Summation and difference branches of one pyramid level, each 2C wide.
struct EnhancedLevel {
  TokenGrid sum_features;
  TokenGrid diff_features;
  int level = 1;
};

/// ReLU(BN(Conv1x1(e1 +- e2))). The difference is signed.
TokenGrid fuse(const TokenGrid& e1, const TokenGrid& e2, FuseMode mode, const FuseParams& p, bool training);

/// [e, e - AvgPool3x3(e)] along channels.
TokenGrid contrast(const TokenGrid& e);

class Enhancer {
 public:
  Enhancer(ParameterStore& store, int channels, const std::string& prefix = "dfe");

  /// Separate fuse parameters for every level and both modes.
  std::vector<EnhancedLevel> enhance_pyramid(const FeaturePyramid& a, const FeaturePyramid& b, bool training) const;

 private:
  std::array<FuseParams, kPyramidLevels> sum_;
  std::array<FuseParams, kPyramidLevels> diff_;
};

}  // namespace ftn
