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

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ftn/errors.hpp"
#include "ftn/metrics.hpp"
#include "ftn/random.hpp"

using namespace ftn;

namespace {

LabelMask random_mask(int h, int w, Rng& rng, double rate) {
  LabelMask m(h, w);
  for (auto& v : m.values) v = rng.uniform() < rate ? 1 : 0;
  return m;
}

}  // namespace

TEST_CASE("binarize uses a closed threshold") {
  CHECK(binarize(ProbabilityMap(1, 1, 0.5)).values[0] == 1);
  CHECK(binarize(ProbabilityMap(1, 1, std::nextafter(0.5, 0.0))).values[0] == 0);
  for (auto v : binarize(ProbabilityMap(3, 4, 0.0)).values) CHECK(v == 0);
  CHECK(binarize(ProbabilityMap(1, 1, 0.89), 0.9).values[0] == 0);
  CHECK_THROWS_AS(binarize(ProbabilityMap(1, 1), 1.0), InvalidInput);
  CHECK_THROWS_AS(binarize(ProbabilityMap(1, 1), 0.0), InvalidInput);
}

TEST_CASE("accumulate counts each pixel once") {
  Rng rng(1);
  const LabelMask g = random_mask(9, 7, rng, 0.3);
  std::uint64_t k = 0;
  for (auto v : g.values) k += v;
  const ConfusionCounts same = accumulate(g, g);
  CHECK(same == ConfusionCounts{k, 0, 0, 63 - k});

  LabelMask inv = g;
  for (auto& v : inv.values) v = 1 - v;
  const ConfusionCounts flipped = accumulate(inv, g);
  CHECK(flipped.tp == 0);
  CHECK(flipped.tn == 0);
  CHECK(flipped.fp == 63 - k);
  CHECK(flipped.fn == k);

  CHECK_THROWS_AS(accumulate(LabelMask(2, 3), LabelMask(3, 2)), InvalidInput);
}

TEST_CASE("accumulation is associative and order independent") {
  Rng rng(2);
  const LabelMask p1 = random_mask(4, 6, rng, 0.5), g1 = random_mask(4, 6, rng, 0.5);
  const LabelMask p2 = random_mask(5, 6, rng, 0.5), g2 = random_mask(5, 6, rng, 0.5);
  // Stack the two tiles vertically.
  auto stack = [](const LabelMask& a, const LabelMask& b) {
    LabelMask out(a.height + b.height, a.width);
    std::copy(a.values.begin(), a.values.end(), out.values.begin());
    std::copy(b.values.begin(), b.values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return out;
  };
  const ConfusionCounts joint = accumulate(stack(p1, p2), stack(g1, g2));
  CHECK(accumulate(p2, g2, accumulate(p1, g1)) == joint);
  CHECK(accumulate(p1, g1, accumulate(p2, g2)) == joint);
  ConfusionCounts merged = accumulate(p2, g2);
  merged.merge(accumulate(p1, g1));
  CHECK(merged == joint);
  CHECK(joint.total() == 54);
}

TEST_CASE("metric values from hand counts") {
  const MetricsRecord r = compute(ConfusionCounts{3, 1, 2, 10});
  CHECK(r.precision == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(r.recall == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.iou == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.oa == doctest::Approx(0.8125).epsilon(1e-15));
  CHECK(r.undefined.empty());

  const MetricsRecord perfect = compute(ConfusionCounts{5, 0, 0, 7});
  for (double v : {perfect.precision, perfect.recall, perfect.f1, perfect.iou, perfect.oa}) CHECK(v == 1.0);
}

TEST_CASE("harmonic mean agrees with published rows") {
  // Precision, recall and F1 as printed, in percent.
  CHECK(std::abs(100 * f1_score(0.9271, 0.8937) - 91.01) < 0.005);
  CHECK(std::abs(100 * f1_score(0.9309, 0.9124) - 92.16) < 0.005);
  // IoU follows from F1 up to the rounding of the printed values.
  const double f1 = 0.9101;
  CHECK(std::abs(100 * f1 / (2 - f1) - 83.51) < 0.02);
  CHECK(f1_score(0.0, 0.0) == 0.0);
}

TEST_CASE("f1 and iou satisfy F1 = 2 IoU / (1 + IoU) on random counts") {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    auto draw = [&rng] { return static_cast<std::uint64_t>(rng.uniform_int(0, 1000)); };
    ConfusionCounts c{draw(), draw(), draw(), draw()};
    if (c.total() == 0) continue;
    const MetricsRecord r = compute(c);
    CHECK(r.f1 == doctest::Approx(2 * r.iou / (1 + r.iou)).epsilon(1e-12));
    CHECK(r.f1 >= r.iou);
    if (r.iou > 0.0 && r.iou < 1.0) CHECK(r.f1 > r.iou);
    for (double v : {r.precision, r.recall, r.f1, r.iou, r.oa}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("undefined ratios are reported as zero with a flag") {
  const MetricsRecord empty_change = compute(ConfusionCounts{0, 0, 0, 16});
  CHECK(empty_change.precision == 0.0);
  CHECK(empty_change.recall == 0.0);
  CHECK(empty_change.f1 == 0.0);
  CHECK(empty_change.iou == 0.0);
  CHECK(empty_change.oa == 1.0);
  CHECK(empty_change.undefined == std::vector<std::string>{"precision", "recall", "f1", "iou"});

  const MetricsRecord no_pred = compute(ConfusionCounts{0, 0, 4, 4});
  CHECK(no_pred.undefined == std::vector<std::string>{"precision", "f1"});
  CHECK_THROWS_AS(compute(ConfusionCounts{}), InvalidInput);
}

TEST_CASE("macro averaging means per-tile metrics") {
  const std::vector<ConfusionCounts> tiles{{3, 1, 2, 10}, {5, 0, 0, 7}};
  const MetricsRecord m = compute_macro(tiles);
  CHECK(m.precision == doctest::Approx(0.875));
  CHECK(m.f1 == doctest::Approx((2.0 / 3.0 + 1.0) / 2));
  CHECK(m.oa == doctest::Approx((0.8125 + 1.0) / 2));
  CHECK_THROWS_AS(compute_macro({}), InvalidInput);
}

TEST_CASE("metrics record text round trip") {
  const MetricsRecord r = compute(ConfusionCounts{17, 4, 9, 301});
  const std::string text = r.to_text();
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
  const MetricsRecord back = MetricsRecord::from_text(text);
  CHECK(back.precision == r.precision);
  CHECK(back.recall == r.recall);
  CHECK(back.f1 == r.f1);
  CHECK(back.iou == r.iou);
  CHECK(back.oa == r.oa);

  CHECK_THROWS_AS(MetricsRecord::from_text("precision=1\nrecall=1\n"), InvalidInput);
  CHECK_THROWS_AS(MetricsRecord::from_text(text + "kappa=0.5\n"), InvalidInput);
  CHECK_THROWS_AS(MetricsRecord::from_text("precision 1\n"), InvalidInput);
}
