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
#include <string>
#include <vector>

#include "ftn/plane.hpp"

namespace ftn {

/// Pixel counts with the change class as positive.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  /// Parallel-reduction primitive.
  ConfusionCounts& merge(const ConfusionCounts& other);
  bool operator==(const ConfusionCounts&) const = default;
};

struct MetricsRecord {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
  double oa = 0.0;
  /// Names of metrics whose ratio was 0/0 and therefore reported as 0.
  std::vector<std::string> undefined;

  /// key=value lines, exactly the five metric keys.
  std::string to_text() const;
  static MetricsRecord from_text(const std::string& text);
};

LabelMask binarize(const ProbabilityMap& p, double threshold = 0.5);

ConfusionCounts accumulate(const LabelMask& pred, const LabelMask& gt, ConfusionCounts counts = {});

/// Harmonic mean, 0 when both are 0.
double f1_score(double precision, double recall);

/// Micro-averaged metrics; throws on all-zero counts.
MetricsRecord compute(const ConfusionCounts& c);

/// Mean of per-tile metrics.
MetricsRecord compute_macro(std::span<const ConfusionCounts> per_tile);

}  // namespace ftn
