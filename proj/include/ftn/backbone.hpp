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

// Siamese hierarchical window-attention encoder.
//
// Four Swin-style stages at strides 4/8/16/32 followed by an extra stage of
// block pairs at stride 32 that widens the receptive field without further
// downsampling. Every level is projected to a common channel width.

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "ftn/autograd.hpp"
#include "ftn/params.hpp"

namespace ftn {

/// Feature grid (batch, height, width, channels) plus its stride in input pixels.
struct TokenGrid {
  Var values;
  int stride = 1;

  int batch() const { return values.dim(0); }
  int height() const { return values.dim(1); }
  int width() const { return values.dim(2); }
  int channels() const { return values.dim(3); }
};

inline constexpr int kPyramidLevels = 5;
using FeaturePyramid = std::array<TokenGrid, kPyramidLevels>;

struct EncoderConfig {
  int patch_size = 4;
  int embed_dim = 32;
  std::array<int, 4> stage_depths{2, 2, 2, 2};
  std::array<int, 4> stage_heads{2, 4, 8, 8};
  int window_size = 4;
  /// Number of (W-MSA, SW-MSA) block pairs in the fifth stage.
  int extra_stage_depth = 1;
  int reduce_to = 32;
  double mlp_ratio = 4.0;

  void validate() const;
  int stage_channels(int stage) const { return embed_dim << stage; }
  /// Side multiple at which no padding is required anywhere.
  int alignment() const { return patch_size * 8; }

  static EncoderConfig desk();
  static EncoderConfig full();
};

struct SwinBlockParams {
  int channels = 0;
  int window_size = 1;
  int shift = 0;
  int num_heads = 1;
  double mlp_ratio = 4.0;
  LayerNorm norm1;
  Linear qkv;
  Linear proj;
  LayerNorm norm2;
  Linear fc1;
  Linear fc2;
  /// ((2*window_size - 1)^2, num_heads), zero at init.
  Var relative_bias;

  void validate() const;
};

SwinBlockParams make_swin_block(ParameterStore& store, const std::string& name, int channels, int heads, int window,
                                bool shifted, double mlp_ratio);

struct PatchMergeParams {
  LayerNorm norm;   // over 4c
  Linear reduction; // 4c -> 2c, no bias
};

/// Window size and shift actually used on an h x w grid: windows never
/// exceed the grid, and a grid that fits in one window is not shifted.
std::pair<int, int> effective_window(int height, int width, int window, int shift);

/// image (B, H, W, 3) -> (B, ceil(H/p), ceil(W/p), C) at stride p.
TokenGrid patch_embed(const Var& image, const Linear& projection, int patch_size);
/// x + (S)W-MSA(LN(x)).
TokenGrid window_attention(const TokenGrid& x, const SwinBlockParams& p);
/// Attention sub-block followed by x + MLP(LN(x)).
TokenGrid swin_block(const TokenGrid& x, const SwinBlockParams& p);
TokenGrid swin_block_pair(const TokenGrid& x, const SwinBlockParams& regular, const SwinBlockParams& shifted);
TokenGrid patch_merge(const TokenGrid& x, const PatchMergeParams& p);
TokenGrid reduce_channels(const TokenGrid& x, const Linear& projection);

class Encoder {
 public:
  Encoder(ParameterStore& store, const EncoderConfig& cfg, const std::string& prefix = "backbone");

  const EncoderConfig& config() const { return cfg_; }

  /// images (B, H, W, 3) -> E1..E5.
  FeaturePyramid encode(const Var& images) const;
  /// Both images go through the same parameters in a single batched pass.
  std::pair<FeaturePyramid, FeaturePyramid> encode_siamese(const Var& a, const Var& b) const;

  const std::vector<SwinBlockParams>& stage_blocks(int stage) const { return stages_[static_cast<std::size_t>(stage)]; }

 private:
  EncoderConfig cfg_;
  Linear embed_;
  std::array<std::vector<SwinBlockParams>, 5> stages_;
  std::array<PatchMergeParams, 3> merges_;
  std::array<Linear, kPyramidLevels> reducers_;
};

}  // namespace ftn
