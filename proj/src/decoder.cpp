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

#include "ftn/decoder.hpp"

#include "ftn/errors.hpp"

namespace ftn {

PamParams make_pam(ParameterStore& store, const std::string& name, int in_channels, int channels, bool with_gate) {
  PamParams p{make_linear(store, name + ".fuse", in_channels, channels), make_batch_norm(store, name + ".bn", channels), {}};
  if (with_gate) p.attention = make_linear(store, name + ".attention", channels, channels);
  return p;
}

TokenGrid pam(const TokenGrid& input, const PamParams& p, bool use_gate, bool training) {
  if (input.channels() != p.fuse.in_features()) {
    throw ConfigError("pam: input has " + std::to_string(input.channels()) + " channels, fuse conv expects " +
                      std::to_string(p.fuse.in_features()));
  }
  Var f = ops::relu(p.bn(p.fuse(input.values), training));
  if (!use_gate) return TokenGrid{f, input.stride};
  if (!p.attention.weight.defined()) throw ConfigError("pam: gate requested but no attention conv was built");
  Var gate = ops::sigmoid(p.attention(ops::global_avg_pool(f)));
  return TokenGrid{ops::add(ops::channel_scale(f, gate), f), input.stride};
}

TokenGrid pam(const EnhancedLevel& level, const PamParams& p, bool use_gate, bool training) {
  Var stacked = ops::concat_channels({level.sum_features.values, level.diff_features.values});
  return pam(TokenGrid{stacked, level.sum_features.stride}, p, use_gate, training);
}

TokenGrid patch_unmerge(const TokenGrid& x, const Linear& expand) {
  if (expand.out_features() != 4 * x.channels()) throw ConfigError("patch_unmerge: expansion must be C -> 4C");
  return TokenGrid{ops::depth_to_space(expand(x.values), 2), x.stride / 2};
}

void DecoderConfig::validate(int channels) const {
  for (int d : swin_depths) {
    if (d < 1) throw ConfigError("decoder config: depths must be positive");
  }
  if (heads < 1 || channels % heads) throw ConfigError("decoder config: channels not divisible by heads");
  if (window_size < 1) throw ConfigError("decoder config: window size must be positive");
}

PyramidDecoder::PyramidDecoder(ParameterStore& store, int channels, const DecoderConfig& cfg, const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate(channels);
  for (int t = 0; t < 4; ++t) {
    if (cfg_.kind == DecoderKind::pcp) {
      for (int b = 0; b < cfg_.swin_depths[static_cast<std::size_t>(t)]; ++b) {
        blocks_[static_cast<std::size_t>(t)].push_back(make_swin_block(
            store, prefix + ".stages." + std::to_string(t) + ".blocks." + std::to_string(b), channels, cfg_.heads,
            cfg_.window_size, b % 2 == 1, cfg_.mlp_ratio));
      }
    }
    if (t > 0) {
      unmerge_[static_cast<std::size_t>(t - 1)] =
          make_linear(store, prefix + ".unmerge." + std::to_string(t), channels, 4 * channels);
    }
  }
}

std::array<TokenGrid, kPyramidLevels> PyramidDecoder::decode(const std::array<TokenGrid, kPyramidLevels>& attended) const {
  for (int k = 1; k < kPyramidLevels; ++k) {
    const TokenGrid& fine = attended[static_cast<std::size_t>(k - 1)];
    const TokenGrid& coarse = attended[static_cast<std::size_t>(k)];
    const bool same_stride = k == kPyramidLevels - 1;
    const bool ok = fine.channels() == coarse.channels() && fine.batch() == coarse.batch() &&
                    (same_stride ? fine.stride == coarse.stride && fine.height() == coarse.height() &&
                                       fine.width() == coarse.width()
                                 : fine.stride * 2 == coarse.stride && coarse.height() * 2 >= fine.height() &&
                                       coarse.width() * 2 >= fine.width());
    if (!ok) throw InvalidInput("pcp_decode: level " + std::to_string(k) + " and " + std::to_string(k + 1) + " are inconsistent");
  }
  std::array<TokenGrid, kPyramidLevels> out;
  out[4] = attended[4];
  for (int k = 3; k >= 0; --k) {
    const int t = 3 - k;
    TokenGrid x = out[static_cast<std::size_t>(k + 1)];
    for (const SwinBlockParams& b : blocks_[static_cast<std::size_t>(t)]) x = swin_block(x, b);
    // Levels 5 and 4 share stride 32, so that transition has no unmerging.
    if (t > 0) x = patch_unmerge(x, unmerge_[static_cast<std::size_t>(t - 1)]);
    const TokenGrid& skip = attended[static_cast<std::size_t>(k)];
    Var aligned = ops::crop_hw(x.values, skip.height(), skip.width());
    out[static_cast<std::size_t>(k)] = TokenGrid{ops::add(aligned, skip.values), skip.stride};
  }
  return out;
}

PredictionHeads::PredictionHeads(ParameterStore& store, int channels, const std::string& prefix) {
  for (int k = 0; k < kPyramidLevels; ++k) {
    side_[static_cast<std::size_t>(k)] = make_linear(store, prefix + ".side." + std::to_string(k), channels, 1);
  }
  fuse_.weight = store.constant(prefix + ".fuse.weight", {kPyramidLevels, 1}, 1.0 / kPyramidLevels);
  fuse_.bias = store.constant(prefix + ".fuse.bias", {1}, 0.0);
}

PredictionSet PredictionHeads::predict(const std::array<TokenGrid, kPyramidLevels>& decoded, int height, int width) const {
  PredictionSet out;
  std::vector<Var> maps;
  for (int k = 0; k < kPyramidLevels; ++k) {
    const TokenGrid& level = decoded[static_cast<std::size_t>(k)];
    if (level.height() * level.stride < height || level.width() * level.stride < width) {
      throw InvalidInput("predict_heads: level " + std::to_string(k + 1) + " does not cover the input");
    }
    Var logits = side_[static_cast<std::size_t>(k)](level.values);
    Var full = ops::crop_hw(ops::upsample_bilinear(logits, level.stride), height, width);
    out.side_logits[static_cast<std::size_t>(k)] = full;
    maps.push_back(full);
  }
  out.fused_logits = fuse_(ops::concat_channels(maps));
  return out;
}

}  // namespace ftn
