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

#include "ftn/errors.hpp"
#include "ftn/model.hpp"
#include "test_support.hpp"

using namespace ftn;
using namespace ftn::testing;

namespace {

ModelConfig small_model() {
  ModelConfig m;
  m.encoder.embed_dim = 8;
  m.encoder.stage_heads = {1, 2, 2, 4};
  m.encoder.reduce_to = 8;
  m.encoder.mlp_ratio = 2.0;
  m.decoder.heads = 1;
  m.decoder.swin_depths = {2, 2, 2, 2};
  m.decoder.mlp_ratio = 2.0;
  return m;
}

}  // namespace

TEST_CASE("forward yields five side maps and a fused map at input size") {
  const ChangeDetector model(small_model(), 1);
  Rng rng(1);
  for (int side : {64, 96, 40}) {
    const Var a(random_tensor({2, side, side, 3}, rng)), b(random_tensor({2, side, side, 3}, rng));
    const PredictionSet p = model.forward(a, b, false);
    CHECK(p.fused_logits.shape() == Shape{2, side, side, 1});
    for (const Var& s : p.side_logits) CHECK(s.shape() == Shape{2, side, side, 1});
  }
  CHECK_THROWS_AS(model.forward(Var(Tensor({1, 32, 32, 3})), Var(Tensor({1, 32, 40, 3})), false), InvalidInput);
}

TEST_CASE("every trainable parameter receives a gradient") {
  for (bool dfe : {true, false}) {
    ModelConfig cfg = small_model();
    cfg.use_dfe = dfe;
    ChangeDetector model(cfg, 2);
    Rng rng(2);
    const Var a(random_tensor({2, 32, 32, 3}, rng)), b(random_tensor({2, 32, 32, 3}, rng));
    const PredictionSet p = model.forward(a, b, true);
    std::vector<Var> terms{project(p.fused_logits, random_tensor(p.fused_logits.shape(), rng))};
    for (const Var& s : p.side_logits) terms.push_back(project(s, random_tensor(s.shape(), rng)));
    backward(ops::sum(terms));
    for (const auto& param : model.store().parameters()) {
      if (!param.trainable) continue;
      INFO(param.name);
      CHECK(param.var.has_grad());
    }
  }
}

TEST_CASE("images are normalized per channel") {
  RgbImage img(2, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      img.at(y, x, 0) = 0.485;
      img.at(y, x, 1) = 0.456 + 0.224;
      img.at(y, x, 2) = 0.406 - 2 * 0.225;
    }
  const Tensor t = normalize_image(img);
  CHECK(t.shape() == Shape{1, 2, 2, 3});
  CHECK(t[0] == doctest::Approx(0.0));
  CHECK(t[1] == doctest::Approx(1.0));
  CHECK(t[2] == doctest::Approx(-2.0));

  SamplePair p{img, img, LabelMask(2, 2), "p"};
  SamplePair q = p;
  q.image_b.at(1, 1, 0) = 1.0;
  const std::vector<const SamplePair*> members{&p, &q};
  const Tensor second = image_batch(members, true);
  CHECK(second.shape() == Shape{2, 2, 2, 3});
  CHECK(second[12 + 9] == doctest::Approx((1.0 - 0.485) / 0.229));
  CHECK(image_batch(members, false)[12 + 9] == doctest::Approx(0.0));
}

TEST_CASE("batched prediction matches one-at-a-time prediction") {
  const ChangeDetector model(small_model(), 3);
  std::vector<SamplePair> pairs = synth_generate(4, 3, 32);
  const auto extra = synth_generate(5, 1, 48);
  pairs.insert(pairs.begin() + 1, extra[0]);
  const auto batched = model.predict(pairs, 3);
  REQUIRE(batched.size() == 4);
  CHECK(batched[1].height == 48);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto single = model.predict(std::span<const SamplePair>(&pairs[i], 1), 1);
    double worst = 0;
    for (std::size_t k = 0; k < single[0].size(); ++k) {
      worst = std::max(worst, std::abs(single[0].values[k] - batched[i].values[k]));
    }
    // Eval-mode normalization makes samples independent of their batch mates.
    CHECK(worst < 1e-12);
    for (double v : batched[i].values) CHECK((v > 0.0 && v < 1.0));
  }
  CHECK_THROWS_AS(model.predict(pairs, 0), InvalidInput);
}

TEST_CASE("same seed gives the same weights") {
  const ChangeDetector a(small_model(), 9), b(small_model(), 9), c(small_model(), 10);
  const auto& pa = a.store().parameters();
  const auto& pb = b.store().parameters();
  const auto& pc = c.store().parameters();
  REQUIRE(pa.size() == pb.size());
  bool any_differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(max_abs_diff(pa[i].var.value(), pb[i].var.value()) == 0.0);
    any_differs = any_differs || max_abs_diff(pa[i].var.value(), pc[i].var.value()) > 0.0;
  }
  CHECK(any_differs);
}
