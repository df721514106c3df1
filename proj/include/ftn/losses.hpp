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

// Deeply supervised change-detection objective. Every loss works on one
// probability map against one binary label and also returns its analytic
// gradient with respect to the probabilities; the Var-level wrappers at
// the bottom average those over a batch and plug them into autograd.

#include <array>
#include <span>

#include "ftn/autograd.hpp"
#include "ftn/decoder.hpp"
#include "ftn/plane.hpp"

namespace ftn {

using WeightMap = Plane<double>;

/// Which map decides the class and boundary terms of the pixel weights.
enum class WeightReference { label, prediction };

struct LossConfig {
  /// Pixel fraction of {no-change, change} over the training split.
  std::array<double, 2> class_frequencies{0.5, 0.5};
  double boundary_weight = 2.0;
  int ssim_window = 11;
  double ssim_epsilon = 1e-4;
  std::array<double, kPyramidLevels> side_weights{1.0, 1.0, 1.0, 1.0, 1.0};
  bool use_bce = true;
  /// Median-frequency and boundary weighting; off means plain BCE.
  bool weighted_bce = true;
  bool use_ssim = true;
  bool use_siou = true;
  WeightReference weight_reference = WeightReference::label;

  void validate() const;
};

inline constexpr double kLogClamp = 1e-7;
inline constexpr double kIouEpsilon = 1e-7;
inline constexpr double kFrequencyFloor = 1e-6;

/// Raw pixel fractions over every mask; throws on an empty collection.
std::array<double, 2> class_frequencies(std::span<const LabelMask> masks);
/// Raises each fraction to at least `floor` and renormalizes to sum 1.
std::array<double, 2> floor_frequencies(std::array<double, 2> f, double floor = kFrequencyFloor);

/// True where any 4-neighbour carries a different label.
Plane<std::uint8_t> boundary_pixels(const LabelMask& reference);

/// median(f) / f[class] + w0 * [boundary], from the reference map.
WeightMap wbce_weights(const LabelMask& reference, const LossConfig& cfg);

struct LossEval {
  double value = 0.0;
  Plane<double> grad;  // d value / d p
};

double wbce_loss(const ProbabilityMap& p, const LabelMask& g, const WeightMap& w);
LossEval wbce_loss_grad(const ProbabilityMap& p, const LabelMask& g, const WeightMap& w);

double ssim_loss(const ProbabilityMap& p, const LabelMask& g, const LossConfig& cfg);
LossEval ssim_loss_grad(const ProbabilityMap& p, const LabelMask& g, const LossConfig& cfg);

double siou_loss(const ProbabilityMap& p, const LabelMask& g);
LossEval siou_loss_grad(const ProbabilityMap& p, const LabelMask& g);

struct TermBreakdown {
  double wbce = 0.0;
  double ssim = 0.0;
  double siou = 0.0;
  double total() const { return wbce + ssim + siou; }
};

/// Sum of the enabled terms for one map.
LossEval combined_loss_grad(const ProbabilityMap& p, const LabelMask& g, const LossConfig& cfg,
                            TermBreakdown* terms = nullptr);
double combined_loss(const ProbabilityMap& p, const LabelMask& g, const LossConfig& cfg);

/// L(fused) + sum_s alpha_s L(side_s) on probability maps of one sample.
double total_loss(const ProbabilityMap& fused, std::span<const ProbabilityMap> sides, const LabelMask& g,
                  const LossConfig& cfg);

/// Batch-mean combined loss of probs (B, H, W, 1) against masks.
Var combined_loss(const Var& probs, std::span<const LabelMask> masks, const LossConfig& cfg,
                  TermBreakdown* terms = nullptr);

struct LossReport {
  Var total;
  /// [0] fused output, [1..5] side outputs; batch means.
  std::array<TermBreakdown, kPyramidLevels + 1> terms;
};

/// Applies sigmoid to every logit map and sums the supervised terms.
LossReport total_loss(const PredictionSet& preds, std::span<const LabelMask> masks, const LossConfig& cfg);

}  // namespace ftn
