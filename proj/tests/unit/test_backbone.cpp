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

#include <cmath>
#include <set>

#include "ftn/backbone.hpp"
#include "ftn/errors.hpp"
#include "ftn/kernels.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace ftn;
using namespace ftn::testing;


TEST_CASE("patch embedding shape and linearity") {
  ParameterStore store(1);
  const Linear proj = make_linear(store, "pe", 48, 32);
  const TokenGrid t = patch_embed(Var(Tensor({1, 64, 64, 3})), proj, 4);
  CHECK(t.values.shape() == Shape{1, 16, 16, 32});
  CHECK(t.stride == 4);
  for (double v : t.values.value().values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(patch_embed(Var(Tensor({1, 0, 4, 3})), proj, 4), InvalidInput);
}

TEST_CASE("effective window clamps to the grid and drops the shift") {
  CHECK(effective_window(16, 16, 4, 2) == std::pair{4, 2});
  CHECK(effective_window(4, 4, 4, 2) == std::pair{4, 0});
  CHECK(effective_window(2, 3, 4, 2) == std::pair{2, 0});
  CHECK(effective_window(3, 12, 12, 6) == std::pair{3, 0});
}

TEST_CASE("full-grid window attention equals global attention") {
  Rng rng(7);
  for (int window : {8, 12}) {
    ParameterStore store(2);
    const SwinBlockParams p = random_block(store, "blk", 16, 2, window, false, rng);
    const Tensor x = random_tensor({2, 8, 8, 16}, rng);
    const TokenGrid got = window_attention(TokenGrid{Var(x), 4}, p);
    const Tensor want = global_attention_oracle(x, p);
    CHECK(max_abs_diff(got.values.value(), want) <= 1e-5);
  }
}

TEST_CASE("attention rows are distributions") {
  Rng rng(8);
  kernels::WindowGeometry g{1, 8, 8, 8, 2, 4, 2, 4};
  std::vector<double> qkv(64 * 24), table(static_cast<std::size_t>(g.table_rows()) * 2), out(64 * 8),
      probs(g.probs_size());
  for (auto& v : qkv) v = rng.normal();
  for (auto& v : table) v = rng.normal();
  kernels::window_attention_forward(g, qkv.data(), table.data(), out.data(), probs.data());
  const int n = g.tokens();
  for (std::size_t row = 0; row < probs.size() / static_cast<std::size_t>(n); ++row) {
    double s = 0;
    for (int j = 0; j < n; ++j) s += probs[row * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("windows do not leak into each other") {
  Rng rng(9);
  const int h = 8, w = 8, c = 8, ws = 4, s = 2;
  for (bool shifted : {false, true}) {
    ParameterStore store(3);
    const SwinBlockParams p = random_block(store, "blk", c, 2, ws, shifted, rng);
    Tensor x = random_tensor({1, h, w, c}, rng);
    const Tensor base = window_attention(TokenGrid{Var(x), 4}, p).values.value();
    const int py = 3, px = 6;  // perturbed token
    // A random direction: a constant offset would vanish in the LayerNorm.
    for (int k = 0; k < c; ++k) x[static_cast<std::size_t>((py * w + px) * c + k)] += rng.normal();
    const Tensor moved = window_attention(TokenGrid{Var(x), 4}, p).values.value();

    // Which tokens may see the perturbed one: same window in the rolled
    // frame and, when shifted, the same pre-roll region of that window.
    auto group = [&](int y, int xx) {
      const int sh = shifted ? s : 0;
      const int ry = ((y - sh) % h + h) % h, rx = ((xx - sh) % w + w) % w;
      auto region = [&](int v, int n) { return !shifted ? 0 : (v < n - ws ? 0 : (v < n - sh ? 1 : 2)); };
      return std::tuple{ry / ws, rx / ws, region(ry, h), region(rx, w)};
    };
    int affected = 0;
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        double diff = 0;
        for (int k = 0; k < c; ++k) {
          const auto i = static_cast<std::size_t>((y * w + xx) * c + k);
          diff = std::max(diff, std::abs(moved[i] - base[i]));
        }
        if (group(y, xx) == group(py, px)) {
          INFO("token " << y << "," << xx << " shifted " << shifted);
          CHECK(diff > 0.0);
          ++affected;
        } else {
          INFO("token " << y << "," << xx << " shifted " << shifted);
          CHECK(diff == 0.0);
        }
      }
    }
    CHECK(affected > 1);
  }
}

TEST_CASE("swin block pair with zero projections is the identity") {
  Rng rng(10);
  ParameterStore store(4);
  const SwinBlockParams a = make_swin_block(store, "a", 8, 2, 4, false, 4.0);
  const SwinBlockParams b = make_swin_block(store, "b", 8, 2, 4, true, 4.0);
  for (const auto* p : {&a, &b}) {
    for (const Var& v : {p->qkv.weight, p->proj.weight, p->fc1.weight, p->fc2.weight}) v.value_mut().fill(0.0);
  }
  const Tensor x = random_tensor({2, 8, 8, 8}, rng);
  const TokenGrid y = swin_block_pair(TokenGrid{Var(x), 4}, a, b);
  CHECK(max_abs_diff(y.values.value(), x) == 0.0);
  CHECK_THROWS_AS(swin_block_pair(TokenGrid{Var(x), 4}, b, a), ConfigError);
}

TEST_CASE("swin block pair gradients match central differences") {
  Rng rng(11);
  ParameterStore store(5);
  SwinBlockParams a = random_block(store, "a", 8, 2, 4, false, rng);
  SwinBlockParams b = random_block(store, "b", 8, 2, 4, true, rng);
  const Tensor x = random_tensor({1, 8, 8, 8}, rng);
  const GradCheck r = check_gradients(
      [&](const std::vector<Var>& v) {
        SwinBlockParams pa = a, pb = b;
        pa.qkv.weight = v[1];
        pb.proj.weight = v[2];
        pb.relative_bias = v[3];
        return swin_block_pair(TokenGrid{v[0], 4}, pa, pb).values;
      },
      {x, a.qkv.weight.value(), b.proj.weight.value(), b.relative_bias.value()}, 12);
  INFO(r.worst_input << " " << r.relative_error);
  CHECK(r.relative_error < 1e-6);
}

TEST_CASE("patch merge halves resolution and doubles channels") {
  Rng rng(12);
  ParameterStore store(6);
  const PatchMergeParams p{make_layer_norm(store, "n", 128), make_linear(store, "r", 128, 64, false)};
  const TokenGrid y = patch_merge(TokenGrid{Var(random_tensor({1, 16, 16, 32}, rng)), 4}, p);
  CHECK(y.values.shape() == Shape{1, 8, 8, 64});
  CHECK(y.stride == 8);
  // Odd grids are padded, never rejected.
  const TokenGrid odd = patch_merge(TokenGrid{Var(random_tensor({1, 5, 3, 32}, rng)), 4}, p);
  CHECK(odd.values.shape() == Shape{1, 3, 2, 64});

  ParameterStore small(7);
  PatchMergeParams q{make_layer_norm(small, "n", 16), make_linear(small, "r", 16, 8, false)};
  randomize(q.norm.gamma, rng, 1.0);
  const Tensor x = random_tensor({1, 8, 8, 4}, rng);
  const GradCheck r = check_gradients(
      [&](const std::vector<Var>& v) {
        PatchMergeParams pq = q;
        pq.reduction.weight = v[1];
        return patch_merge(TokenGrid{v[0], 4}, pq).values;
      },
      {x, q.reduction.weight.value()}, 13);
  CHECK(r.relative_error < 1e-6);
}

TEST_CASE("reduce_channels with identity weights is the identity") {
  Rng rng(13);
  ParameterStore store(8);
  Linear l = make_linear(store, "red", 6, 6);
  Tensor eye({6, 6});
  for (int i = 0; i < 6; ++i) eye[static_cast<std::size_t>(i * 6 + i)] = 1.0;
  l.weight.value_mut() = eye;
  const Tensor x = random_tensor({1, 3, 3, 6}, rng);
  CHECK(max_abs_diff(reduce_channels(TokenGrid{Var(x), 8}, l).values.value(), x) == 0.0);
  l.weight.value_mut().fill(0.0);
  const TokenGrid zero = reduce_channels(TokenGrid{Var(x), 8}, l);
  for (double v : zero.values.value().values()) CHECK(v == 0.0);
}

TEST_CASE("encoder pyramid strides, sizes and widths") {
  ParameterStore store(9);
  const EncoderConfig cfg = EncoderConfig::desk();
  const Encoder enc(store, cfg);
  Rng rng(14);
  for (auto [side, sizes] : {std::pair{64, std::array{16, 8, 4, 2, 2}}, std::pair{96, std::array{24, 12, 6, 3, 3}},
                             std::pair{384, std::array{96, 48, 24, 12, 12}}}) {
    const FeaturePyramid p = enc.encode(Var(random_tensor({1, side, side, 3}, rng)));
    const std::array strides{4, 8, 16, 32, 32};
    for (int k = 0; k < kPyramidLevels; ++k) {
      const auto& level = p[static_cast<std::size_t>(k)];
      CHECK(level.stride == strides[static_cast<std::size_t>(k)]);
      CHECK(level.height() == sizes[static_cast<std::size_t>(k)]);
      CHECK(level.width() == sizes[static_cast<std::size_t>(k)]);
      CHECK(level.channels() == cfg.reduce_to);
      CHECK(level.values.value().all_finite());
    }
  }
}

TEST_CASE("siamese encoding shares one parameter set") {
  ParameterStore store(10);
  const Encoder enc(store, EncoderConfig::desk());
  Rng rng(15);
  const Tensor a = random_tensor({2, 32, 32, 3}, rng), b = random_tensor({2, 32, 32, 3}, rng);
  const auto [pa, pb] = enc.encode_siamese(Var(a), Var(b));
  const auto [qa, qb] = enc.encode_siamese(Var(b), Var(a));
  const auto [xa, xb] = enc.encode_siamese(Var(a), Var(a));
  const FeaturePyramid single = enc.encode(Var(a));
  for (std::size_t k = 0; k < kPyramidLevels; ++k) {
    CHECK(max_abs_diff(pa[k].values.value(), qb[k].values.value()) == 0.0);
    CHECK(max_abs_diff(pb[k].values.value(), qa[k].values.value()) == 0.0);
    CHECK(max_abs_diff(xa[k].values.value(), xb[k].values.value()) == 0.0);
    CHECK(max_abs_diff(pa[k].values.value(), single[k].values.value()) < 1e-12);
  }
  CHECK_THROWS_AS(enc.encode_siamese(Var(a), Var(Tensor({2, 32, 16, 3}))), InvalidInput);

  // One gradient step through the B branch only still moves both branches.
  for (auto& p : store.parameters()) p.var.node()->requires_grad = p.trainable;
  const auto [ga, gb] = enc.encode_siamese(Var(a), Var(b));
  backward(project(gb[4].values, random_tensor(gb[4].values.shape(), rng)));
  for (auto& p : store.parameters()) {
    if (p.var.has_grad()) {
      double* v = p.var.value_mut().data();
      for (std::size_t i = 0; i < p.var.value().size(); ++i) v[i] -= 0.1 * p.var.grad()[i];
    }
  }
  const auto [ya, yb] = enc.encode_siamese(Var(b), Var(b));
  for (std::size_t k = 0; k < kPyramidLevels; ++k) CHECK(max_abs_diff(ya[k].values.value(), yb[k].values.value()) == 0.0);
  CHECK(max_abs_diff(ya[0].values.value(), gb[0].values.value()) > 0.0);
}

TEST_CASE("encoder config validation") {
  EncoderConfig c = EncoderConfig::desk();
  c.stage_depths = {2, 3, 2, 2};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = EncoderConfig::desk();
  c.stage_heads = {3, 4, 8, 8};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_NOTHROW(EncoderConfig::full().validate());
}
