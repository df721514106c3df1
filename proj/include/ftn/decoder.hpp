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

// Progressive change prediction: channel-attention fusion of the two
// enhancement branches, a top-down pyramid of Swin blocks and patch
// unmerging, and per-level plus fused prediction heads.

#include <array>
#include <string>
#include <vector>

#include "ftn/backbone.hpp"
#include "ftn/enhancement.hpp"

namespace ftn {

struct PamParams {
  Linear fuse;       // 1x1, in -> C
  BatchNorm bn;
  Linear attention;  // 1x1 on the pooled descriptor, C -> C; absent without a gate
};
PamParams make_pam(ParameterStore& store, const std::string& name, int in_channels, int channels,
                   bool with_gate = true);

/// F = ReLU(BN(Conv(input))); returns F * sigmoid(Conv(GAP(F))) + F, or F
/// itself when the gate is disabled.
TokenGrid pam(const TokenGrid& input, const PamParams& p, bool use_gate, bool training);
/// Concatenates the sum and difference branches first.
TokenGrid pam(const EnhancedLevel& level, const PamParams& p, bool use_gate, bool training);

/// Linear C -> 4C followed by a factor-2 depth-to-space.
TokenGrid patch_unmerge(const TokenGrid& x, const Linear& expand);

enum class DecoderKind { pcp, fp };

struct DecoderConfig {
  /// Swin blocks per transition, coarse to fine: 5->4, 4->3, 3->2, 2->1.
  std::array<int, 4> swin_depths{4, 4, 4, 4};
  int heads = 2;
  int window_size = 4;
  double mlp_ratio = 4.0;
  /// fp drops the Swin blocks and keeps only unmerging and additions.
  DecoderKind kind = DecoderKind::pcp;

  void validate(int channels) const;
};

class PyramidDecoder {
 public:
  PyramidDecoder(ParameterStore& store, int channels, const DecoderConfig& cfg, const std::string& prefix = "decoder");

  /// attended[k] is the gated level k+1; returns F_P for every level.
  std::array<TokenGrid, kPyramidLevels> decode(const std::array<TokenGrid, kPyramidLevels>& attended) const;

  const DecoderConfig& config() const { return cfg_; }

 private:
  DecoderConfig cfg_;
  std::array<std::vector<SwinBlockParams>, 4> blocks_;
  std::array<Linear, 3> unmerge_;
};

/// Logit maps at input resolution, each (B, H, W, 1).
struct PredictionSet {
  std::array<Var, kPyramidLevels> side_logits;
  Var fused_logits;
};

class PredictionHeads {
 public:
  PredictionHeads(ParameterStore& store, int channels, const std::string& prefix = "heads");

  /// 1x1 conv per level, bilinear upsampling of logits to (height, width),
  /// and a 1x1 conv over the stacked side maps for the fused output.
  PredictionSet predict(const std::array<TokenGrid, kPyramidLevels>& decoded, int height, int width) const;

 private:
  std::array<Linear, kPyramidLevels> side_;
  Linear fuse_;
};

}  // namespace ftn
