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

#include "ftn/backbone.hpp"

#include <algorithm>

#include "ftn/errors.hpp"

namespace ftn {

void EncoderConfig::validate() const {
  if (patch_size < 1 || embed_dim < 1 || window_size < 1 || reduce_to < 1 || extra_stage_depth < 0 ||
      mlp_ratio <= 0.0) {
    throw ConfigError("encoder config: sizes must be positive");
  }
  for (int s = 0; s < 4; ++s) {
    if (stage_depths[static_cast<std::size_t>(s)] < 2 || stage_depths[static_cast<std::size_t>(s)] % 2) {
      throw ConfigError("encoder config: stage depths must be positive and even (W/SW pairs)");
    }
    if (stage_heads[static_cast<std::size_t>(s)] < 1 || stage_channels(s) % stage_heads[static_cast<std::size_t>(s)]) {
      throw ConfigError("encoder config: stage " + std::to_string(s + 1) + " channels not divisible by heads");
    }
  }
}

EncoderConfig EncoderConfig::desk() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::full() {
  EncoderConfig cfg;
  cfg.embed_dim = 128;
  cfg.stage_depths = {2, 2, 18, 2};
  cfg.stage_heads = {4, 8, 16, 32};
  cfg.window_size = 12;
  cfg.extra_stage_depth = 1;
  cfg.reduce_to = 128;
  return cfg;
}

void SwinBlockParams::validate() const {
  if (num_heads < 1 || channels % num_heads) throw ConfigError("swin block: channels not divisible by heads");
  if (shift != 0 && shift != window_size / 2) throw ConfigError("swin block: shift must be 0 or window/2");
}

SwinBlockParams make_swin_block(ParameterStore& store, const std::string& name, int channels, int heads, int window,
                                bool shifted, double mlp_ratio) {
  SwinBlockParams p;
  p.channels = channels;
  p.window_size = window;
  p.shift = shifted ? window / 2 : 0;
  p.num_heads = heads;
  p.mlp_ratio = mlp_ratio;
  p.validate();
  const int hidden = static_cast<int>(channels * mlp_ratio);
  p.norm1 = make_layer_norm(store, name + ".norm1", channels);
  p.qkv = make_linear(store, name + ".attn.qkv", channels, 3 * channels);
  p.relative_bias = store.constant(name + ".attn.relative_position_bias_table", {(2 * window - 1) * (2 * window - 1), heads}, 0.0);
  p.proj = make_linear(store, name + ".attn.proj", channels, channels);
  p.norm2 = make_layer_norm(store, name + ".norm2", channels);
  p.fc1 = make_linear(store, name + ".mlp.fc1", channels, hidden);
  p.fc2 = make_linear(store, name + ".mlp.fc2", hidden, channels);
  return p;
}

std::pair<int, int> effective_window(int height, int width, int window, int shift) {
  const int side = std::min(height, width);
  if (side <= window) return {side, 0};
  return {window, shift};
}

namespace {

int round_up(int v, int m) { return (v + m - 1) / m * m; }

}  // namespace

TokenGrid patch_embed(const Var& image, const Linear& projection, int patch_size) {
  if (image.value().rank() != 4 || image.dim(1) < 1 || image.dim(2) < 1 || image.dim(0) < 1) {
    throw InvalidInput("patch_embed: image must be a non-empty (B, H, W, 3) raster");
  }
  if (image.dim(3) * patch_size * patch_size != projection.in_features()) {
    throw ConfigError("patch_embed: projection does not match patch size and image channels");
  }
  Var padded = ops::pad_hw(image, round_up(image.dim(1), patch_size), round_up(image.dim(2), patch_size));
  return TokenGrid{projection(ops::space_to_depth(padded, patch_size)), patch_size};
}

TokenGrid window_attention(const TokenGrid& x, const SwinBlockParams& p) {
  p.validate();
  if (x.channels() != p.channels) {
    throw ConfigError("window_attention: grid has " + std::to_string(x.channels()) + " channels, block expects " +
                      std::to_string(p.channels));
  }
  const int h = x.height(), w = x.width();
  const auto [window, shift] = effective_window(h, w, p.window_size, p.shift);
  Var normed = ops::pad_hw(p.norm1(x.values), round_up(h, window), round_up(w, window));
  Var attended = ops::window_attention(p.qkv(normed), p.relative_bias, p.num_heads, window, shift, p.window_size);
  Var out = p.proj(ops::crop_hw(attended, h, w));
  return TokenGrid{ops::add(x.values, out), x.stride};
}

TokenGrid swin_block(const TokenGrid& x, const SwinBlockParams& p) {
  TokenGrid attended = window_attention(x, p);
  Var hidden = ops::gelu(p.fc1(p.norm2(attended.values)));
  return TokenGrid{ops::add(attended.values, p.fc2(hidden)), x.stride};
}

TokenGrid swin_block_pair(const TokenGrid& x, const SwinBlockParams& regular, const SwinBlockParams& shifted) {
  if (regular.shift != 0) throw ConfigError("swin_block_pair: first block must be unshifted");
  if (shifted.shift == 0 && shifted.window_size > 1) throw ConfigError("swin_block_pair: second block must be shifted");
  return swin_block(swin_block(x, regular), shifted);
}

TokenGrid patch_merge(const TokenGrid& x, const PatchMergeParams& p) {
  Var padded = ops::pad_hw(x.values, round_up(x.height(), 2), round_up(x.width(), 2));
  Var merged = ops::space_to_depth(padded, 2);
  return TokenGrid{p.reduction(p.norm(merged)), x.stride * 2};
}

TokenGrid reduce_channels(const TokenGrid& x, const Linear& projection) { return TokenGrid{projection(x.values), x.stride}; }

Encoder::Encoder(ParameterStore& store, const EncoderConfig& cfg, const std::string& prefix) : cfg_(cfg) {
  cfg_.validate();
  embed_ = make_linear(store, prefix + ".patch_embed.proj", 3 * cfg.patch_size * cfg.patch_size, cfg.embed_dim);
  for (int s = 0; s < 5; ++s) {
    const int stage = std::min(s, 3);
    const int channels = cfg.stage_channels(stage);
    const int heads = cfg.stage_heads[static_cast<std::size_t>(stage)];
    const int depth = s < 4 ? cfg.stage_depths[static_cast<std::size_t>(s)] : 2 * cfg.extra_stage_depth;
    for (int b = 0; b < depth; ++b) {
      const std::string name = prefix + ".layers." + std::to_string(s) + ".blocks." + std::to_string(b);
      stages_[static_cast<std::size_t>(s)].push_back(
          make_swin_block(store, name, channels, heads, cfg.window_size, b % 2 == 1, cfg.mlp_ratio));
    }
    if (s < 3) {
      const std::string name = prefix + ".layers." + std::to_string(s) + ".downsample";
      merges_[static_cast<std::size_t>(s)] =
          PatchMergeParams{make_layer_norm(store, name + ".norm", 4 * channels),
                           make_linear(store, name + ".reduction", 4 * channels, 2 * channels, false)};
    }
    reducers_[static_cast<std::size_t>(s)] =
        make_linear(store, prefix + ".reduce." + std::to_string(s), channels, cfg.reduce_to);
  }
}

FeaturePyramid Encoder::encode(const Var& images) const {
  std::array<TokenGrid, kPyramidLevels> stage_out;
  TokenGrid x = patch_embed(images, embed_, cfg_.patch_size);
  for (int s = 0; s < 5; ++s) {
    if (s == 4) x = stage_out[3];
    const auto& blocks = stages_[static_cast<std::size_t>(s)];
    for (std::size_t b = 0; b + 1 < blocks.size(); b += 2) x = swin_block_pair(x, blocks[b], blocks[b + 1]);
    stage_out[static_cast<std::size_t>(s)] = x;
    if (s < 3) x = patch_merge(x, merges_[static_cast<std::size_t>(s)]);
  }
  FeaturePyramid pyramid;
  for (int k = 0; k < kPyramidLevels; ++k) {
    pyramid[static_cast<std::size_t>(k)] =
        reduce_channels(stage_out[static_cast<std::size_t>(k)], reducers_[static_cast<std::size_t>(k)]);
  }
  return pyramid;
}

std::pair<FeaturePyramid, FeaturePyramid> Encoder::encode_siamese(const Var& a, const Var& b) const {
  if (a.shape() != b.shape()) {
    throw InvalidInput("encode_siamese: image shapes differ " + shape_string(a.shape()) + " vs " +
                       shape_string(b.shape()));
  }
  const int batch = a.dim(0);
  const FeaturePyramid joint = encode(ops::concat_batch({a, b}));
  std::pair<FeaturePyramid, FeaturePyramid> out;
  for (int k = 0; k < kPyramidLevels; ++k) {
    const TokenGrid& level = joint[static_cast<std::size_t>(k)];
    out.first[static_cast<std::size_t>(k)] = TokenGrid{ops::slice_batch(level.values, 0, batch), level.stride};
    out.second[static_cast<std::size_t>(k)] = TokenGrid{ops::slice_batch(level.values, batch, batch), level.stride};
  }
  return out;
}

}  // namespace ftn
