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

#include "ftn/model.hpp"

#include <cmath>

#include "ftn/errors.hpp"

namespace ftn {

namespace {
constexpr double kMean[3] = {0.485, 0.456, 0.406};
constexpr double kStd[3] = {0.229, 0.224, 0.225};
}  // namespace

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate(encoder.reduce_to);
}

namespace {

// The plain pyramid ablation has no attention gate either.
bool uses_gate(const ModelConfig& cfg) { return cfg.use_pam && cfg.decoder.kind == DecoderKind::pcp; }

std::vector<PamParams> make_pams(ParameterStore& store, const ModelConfig& cfg) {
  const int c = cfg.encoder.reduce_to;
  const int in = cfg.use_dfe ? 4 * c : 2 * c;
  std::vector<PamParams> pams;
  const bool gate = uses_gate(cfg);
  for (int k = 0; k < kPyramidLevels; ++k) {
    pams.push_back(make_pam(store, "pam." + std::to_string(k + 1), in, c, gate));
  }
  return pams;
}

}  // namespace

ChangeDetector::ChangeDetector(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_((cfg.validate(), cfg)),
      store_(seed),
      encoder_(store_, cfg.encoder),
      enhancer_(cfg.use_dfe ? std::optional<Enhancer>(std::in_place, store_, cfg.encoder.reduce_to) : std::nullopt),
      pams_(make_pams(store_, cfg)),
      decoder_(store_, cfg.encoder.reduce_to, cfg.decoder),
      heads_(store_, cfg.encoder.reduce_to) {}

PredictionSet ChangeDetector::forward(const Var& image_a, const Var& image_b, bool training) const {
  if (image_a.shape() != image_b.shape()) throw InvalidInput("forward: image shapes differ");
  const auto [ea, eb] = encoder_.encode_siamese(image_a, image_b);
  const bool gate = uses_gate(cfg_);
  std::array<TokenGrid, kPyramidLevels> attended;
  if (enhancer_) {
    const auto levels = enhancer_->enhance_pyramid(ea, eb, training);
    for (std::size_t k = 0; k < levels.size(); ++k) attended[k] = pam(levels[k], pams_[k], gate, training);
  } else {
    for (std::size_t k = 0; k < attended.size(); ++k) {
      TokenGrid joined{ops::concat_channels({ea[k].values, eb[k].values}), ea[k].stride};
      attended[k] = pam(joined, pams_[k], gate, training);
    }
  }
  return heads_.predict(decoder_.decode(attended), image_a.dim(1), image_a.dim(2));
}

std::vector<ProbabilityMap> ChangeDetector::predict(std::span<const SamplePair> pairs, int batch_size) const {
  if (batch_size < 1) throw InvalidInput("predict: batch size must be positive");
  std::vector<ProbabilityMap> out;
  out.reserve(pairs.size());
  std::size_t begin = 0;
  while (begin < pairs.size()) {
    // Pairs of different sizes cannot share a batch.
    std::vector<const SamplePair*> batch;
    for (std::size_t i = begin; i < pairs.size() && batch.size() < static_cast<std::size_t>(batch_size); ++i) {
      if (!batch.empty() && (pairs[i].height() != batch.front()->height() || pairs[i].width() != batch.front()->width())) {
        break;
      }
      batch.push_back(&pairs[i]);
    }
    const PredictionSet preds = forward(Var(image_batch(batch, false)), Var(image_batch(batch, true)), false);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      out.push_back(probability_map(preds.fused_logits.value(), static_cast<int>(i)));
    }
    begin += batch.size();
  }
  return out;
}

Tensor normalize_image(const RgbImage& image) {
  Tensor t({1, image.height, image.width, 3});
  for (std::size_t i = 0; i < image.values.size(); ++i) {
    const int c = static_cast<int>(i % 3);
    t[i] = (image.values[i] - kMean[c]) / kStd[c];
  }
  return t;
}

Tensor image_batch(std::span<const SamplePair* const> pairs, bool second) {
  if (pairs.empty()) throw InvalidInput("image_batch: empty batch");
  const int h = pairs.front()->height(), w = pairs.front()->width();
  Tensor t({static_cast<int>(pairs.size()), h, w, 3});
  const std::size_t plane = static_cast<std::size_t>(h) * w * 3;
  for (std::size_t b = 0; b < pairs.size(); ++b) {
    const RgbImage& img = second ? pairs[b]->image_b : pairs[b]->image_a;
    if (img.height != h || img.width != w) throw InvalidInput("image_batch: samples differ in size");
    for (std::size_t i = 0; i < plane; ++i) {
      const int c = static_cast<int>(i % 3);
      t[b * plane + i] = (img.values[i] - kMean[c]) / kStd[c];
    }
  }
  return t;
}

ProbabilityMap probability_map(const Tensor& logits, int index) {
  const int h = logits.dim(1), w = logits.dim(2);
  ProbabilityMap p(h, w);
  const std::size_t offset = static_cast<std::size_t>(index) * h * w;
  for (std::size_t i = 0; i < p.size(); ++i) p.values[i] = 1.0 / (1.0 + std::exp(-logits[offset + i]));
  return p;
}

}  // namespace ftn
