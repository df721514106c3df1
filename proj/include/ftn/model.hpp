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

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ftn/backbone.hpp"
#include "ftn/data.hpp"
#include "ftn/decoder.hpp"
#include "ftn/enhancement.hpp"
#include "ftn/params.hpp"

namespace ftn {

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  /// Off: each PAM sees concat(E_T1, E_T2) instead of the enhanced branches.
  bool use_dfe = true;
  /// Off: PAM keeps its fusion conv but drops the channel gate. The fp
  /// decoder implies this.
  bool use_pam = true;

  void validate() const;
};

/// Full change detector: Siamese encoder, optional enhancement, PAM per
/// level, pyramid decoder and prediction heads, all in one parameter store.
class ChangeDetector {
 public:
  ChangeDetector(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  const Encoder& encoder() const { return encoder_; }

  /// images (B, H, W, 3), already normalized.
  PredictionSet forward(const Var& image_a, const Var& image_b, bool training) const;

  /// Eval-mode change probabilities from the fused head, one map per pair.
  std::vector<ProbabilityMap> predict(std::span<const SamplePair> pairs, int batch_size) const;

 private:
  ModelConfig cfg_;
  ParameterStore store_;
  Encoder encoder_;
  std::optional<Enhancer> enhancer_;
  std::vector<PamParams> pams_;
  PyramidDecoder decoder_;
  PredictionHeads heads_;
};

/// Stacks one side of each pair into (B, H, W, 3) with per-channel
/// mean/std normalization.
Tensor image_batch(std::span<const SamplePair* const> pairs, bool second);
Tensor normalize_image(const RgbImage& image);

/// Fused-logit probabilities of sample `index` in a (B, H, W, 1) logit tensor.
ProbabilityMap probability_map(const Tensor& logits, int index);

}  // namespace ftn
