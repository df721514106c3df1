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

#include "ftn/autograd.hpp"
#include "test_support.hpp"

using namespace ftn;
using namespace ftn::testing;

namespace {

constexpr double kTol = 1e-6;

void expect_grad(const MultiFn& f, const std::vector<Tensor>& inputs, std::uint64_t seed, double tol = kTol) {
  const GradCheck r = check_gradients(f, inputs, seed);
  INFO("worst " << r.worst_input << " rel " << r.relative_error << " abs " << r.max_abs_error);
  CHECK(r.relative_error < tol);
}

}  // namespace

TEST_CASE("elementwise ops differentiate correctly") {
  Rng rng(10);
  const Tensor a = random_tensor({2, 3, 3, 4}, rng), b = random_tensor({2, 3, 3, 4}, rng);
  expect_grad([](const auto& v) { return ops::add(v[0], v[1]); }, {a, b}, 1);
  expect_grad([](const auto& v) { return ops::sub(v[0], v[1]); }, {a, b}, 2);
  expect_grad([](const auto& v) { return ops::mul(v[0], v[1]); }, {a, b}, 3);
  expect_grad([](const auto& v) { return ops::scale(v[0], -2.5); }, {a}, 4);
  expect_grad([](const auto& v) { return ops::sigmoid(v[0]); }, {a}, 5);
  expect_grad([](const auto& v) { return ops::gelu(v[0]); }, {a}, 6);
}

TEST_CASE("relu gradient away from the kink") {
  Rng rng(11);
  Tensor a = random_tensor({1, 4, 4, 2}, rng);
  for (double& v : a.values()) v += v >= 0 ? 0.1 : -0.1;
  expect_grad([](const auto& v) { return ops::relu(v[0]); }, {a}, 7);
}

TEST_CASE("scalar reductions") {
  Rng rng(12);
  const Tensor a({1}, 0.7), b({1}, -1.3), c({1}, 2.0);
  expect_grad([](const auto& v) { return ops::sum({v[0], v[1], v[2]}); }, {a, b, c}, 8);
  expect_grad([](const auto& v) { return ops::weighted_sum({v[0], v[1], v[2]}, {0.5, 2.0, -1.0}); }, {a, b, c}, 9);
}

TEST_CASE("linear matches a naive product and differentiates") {
  Rng rng(13);
  const Tensor x = random_tensor({2, 3, 2, 5}, rng), w = random_tensor({5, 4}, rng), bias = random_tensor({4}, rng);
  const Var y = ops::linear(Var(x), Var(w), Var(bias));
  for (int t = 0; t < 12; ++t) {
    for (int o = 0; o < 4; ++o) {
      double ref = bias[static_cast<std::size_t>(o)];
      for (int i = 0; i < 5; ++i) ref += x[static_cast<std::size_t>(t * 5 + i)] * w[static_cast<std::size_t>(i * 4 + o)];
      CHECK(y.value()[static_cast<std::size_t>(t * 4 + o)] == doctest::Approx(ref).epsilon(1e-12));
    }
  }
  expect_grad([](const auto& v) { return ops::linear(v[0], v[1], v[2]); }, {x, w, bias}, 10);
  expect_grad([](const auto& v) { return ops::linear(v[0], v[1], Var()); }, {x, w}, 11);
}

TEST_CASE("layer norm standardizes each token") {
  Rng rng(14);
  const Tensor x = random_tensor({2, 2, 2, 6}, rng, 3.0);
  const Var y = ops::layer_norm(Var(x), Var(Tensor({6}, 1.0)), Var(Tensor({6}, 0.0)));
  for (int t = 0; t < 8; ++t) {
    double m = 0, s = 0;
    for (int c = 0; c < 6; ++c) m += y.value()[static_cast<std::size_t>(t * 6 + c)] / 6;
    for (int c = 0; c < 6; ++c) s += std::pow(y.value()[static_cast<std::size_t>(t * 6 + c)] - m, 2) / 6;
    CHECK(std::abs(m) < 1e-12);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-4));  // eps inside the root
  }
  const Tensor g = random_tensor({6}, rng), b = random_tensor({6}, rng);
  expect_grad([](const auto& v) { return ops::layer_norm(v[0], v[1], v[2]); }, {x, g, b}, 12);
}

TEST_CASE("batch norm uses batch statistics in training and running ones in eval") {
  Rng rng(15);
  const Tensor x = random_tensor({3, 2, 2, 4}, rng, 2.0);
  ops::BatchNormState st{Var(Tensor({4}, 0.0)), Var(Tensor({4}, 1.0))};
  const Var gamma(Tensor({4}, 1.0)), beta(Tensor({4}, 0.0));
  const Var y = ops::batch_norm(Var(x), gamma, beta, st, true);
  const int n = 12;
  for (int c = 0; c < 4; ++c) {
    double m = 0, v = 0;
    for (int t = 0; t < n; ++t) m += x[static_cast<std::size_t>(t * 4 + c)] / n;
    for (int t = 0; t < n; ++t) v += std::pow(x[static_cast<std::size_t>(t * 4 + c)] - m, 2);
    double ym = 0;
    for (int t = 0; t < n; ++t) ym += y.value()[static_cast<std::size_t>(t * 4 + c)] / n;
    CHECK(std::abs(ym) < 1e-12);
    CHECK(st.running_mean.value()[static_cast<std::size_t>(c)] == doctest::Approx(0.1 * m).epsilon(1e-12));
    CHECK(st.running_var.value()[static_cast<std::size_t>(c)] ==
          doctest::Approx(0.9 + 0.1 * v / (n - 1)).epsilon(1e-12));
  }
  const Var e = ops::batch_norm(Var(x), gamma, beta, st, false);
  for (int t = 0; t < n; ++t) {
    for (int c = 0; c < 4; ++c) {
      const auto i = static_cast<std::size_t>(t * 4 + c);
      const double ref = (x[i] - st.running_mean.value()[static_cast<std::size_t>(c)]) /
                         std::sqrt(st.running_var.value()[static_cast<std::size_t>(c)] + 1e-5);
      CHECK(e.value()[i] == doctest::Approx(ref).epsilon(1e-12));
    }
  }
  const Tensor g = random_tensor({4}, rng), b = random_tensor({4}, rng);
  expect_grad(
      [&](const auto& v) {
        ops::BatchNormState s{Var(Tensor({4}, 0.0)), Var(Tensor({4}, 1.0))};
        return ops::batch_norm(v[0], v[1], v[2], s, true);
      },
      {x, g, b}, 13);
}

TEST_CASE("channel and batch plumbing") {
  Rng rng(16);
  const Tensor a = random_tensor({2, 3, 3, 2}, rng), b = random_tensor({2, 3, 3, 3}, rng);
  const Var cat = ops::concat_channels({Var(a), Var(b)});
  CHECK(cat.shape() == Shape{2, 3, 3, 5});
  CHECK(cat.value()[5 + 2] == b[3]);
  expect_grad([](const auto& v) { return ops::concat_channels({v[0], v[1]}); }, {a, b}, 14);

  const Tensor c = random_tensor({1, 3, 3, 2}, rng);
  const Var batch = ops::concat_batch({Var(a), Var(c)});
  CHECK(batch.shape() == Shape{3, 3, 3, 2});
  const Var back = ops::slice_batch(batch, 2, 1);
  CHECK(back.value().shape() == c.shape());
  CHECK(std::equal(c.values().begin(), c.values().end(), back.value().values().begin()));
  expect_grad([](const auto& v) { return ops::slice_batch(ops::concat_batch({v[0], v[1]}), 1, 2); }, {a, c}, 15);
}

TEST_CASE("avg_pool3x3 counts zero padding in the mean") {
  Tensor x({1, 3, 3, 1}, 9.0);
  const Var y = ops::avg_pool3x3(Var(x));
  CHECK(y.value()[0] == doctest::Approx(4.0));  // corner: 4 of 9 cells inside
  CHECK(y.value()[1] == doctest::Approx(6.0));  // edge: 6 of 9
  CHECK(y.value()[4] == doctest::Approx(9.0));  // centre
  Rng rng(17);
  expect_grad([](const auto& v) { return ops::avg_pool3x3(v[0]); }, {random_tensor({2, 4, 5, 3}, rng)}, 16);
}

TEST_CASE("global pooling and channel gating") {
  Rng rng(18);
  const Tensor x = random_tensor({2, 3, 4, 3}, rng), gate = random_tensor({2, 1, 1, 3}, rng);
  const Var p = ops::global_avg_pool(Var(x));
  CHECK(p.shape() == Shape{2, 1, 1, 3});
  double m = 0;
  for (int t = 0; t < 12; ++t) m += x[static_cast<std::size_t>(t * 3 + 1)] / 12;
  CHECK(p.value()[1] == doctest::Approx(m).epsilon(1e-12));
  expect_grad([](const auto& v) { return ops::global_avg_pool(v[0]); }, {x}, 17);
  expect_grad([](const auto& v) { return ops::channel_scale(v[0], v[1]); }, {x, gate}, 18);
}

TEST_CASE("space_to_depth layout and inverse") {
  Rng rng(19);
  const Tensor x = random_tensor({2, 4, 6, 3}, rng);
  const Var s = ops::space_to_depth(Var(x), 2);
  CHECK(s.shape() == Shape{2, 2, 3, 12});
  // (b, y, x, (dy*2+dx)*C + c) <- (b, 2y+dy, 2x+dx, c)
  auto in_at = [&](int b, int y, int xx, int c) { return x[static_cast<std::size_t>(((b * 4 + y) * 6 + xx) * 3 + c)]; };
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 2; ++y)
      for (int xx = 0; xx < 3; ++xx)
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            for (int c = 0; c < 3; ++c)
              CHECK(s.value()[static_cast<std::size_t>(((b * 2 + y) * 3 + xx) * 12 + (dy * 2 + dx) * 3 + c)] ==
                    in_at(b, 2 * y + dy, 2 * xx + dx, c));
  const Var back = ops::depth_to_space(s, 2);
  CHECK(back.value().shape() == x.shape());
  CHECK(max_abs_diff(back.value(), x) == 0.0);
  expect_grad([](const auto& v) { return ops::space_to_depth(v[0], 2); }, {x}, 19);
  expect_grad([](const auto& v) { return ops::depth_to_space(v[0], 2); }, {random_tensor({1, 2, 2, 8}, rng)}, 20);
}

TEST_CASE("pad then crop is the identity") {
  Rng rng(20);
  const Tensor x = random_tensor({1, 3, 5, 2}, rng);
  const Var p = ops::pad_hw(Var(x), 4, 8);
  CHECK(p.shape() == Shape{1, 4, 8, 2});
  CHECK(p.value()[static_cast<std::size_t>((3 * 8 + 7) * 2)] == 0.0);
  CHECK(max_abs_diff(ops::crop_hw(p, 3, 5).value(), x) == 0.0);
  expect_grad([](const auto& v) { return ops::pad_hw(v[0], 4, 6); }, {x}, 21);
  expect_grad([](const auto& v) { return ops::crop_hw(v[0], 2, 3); }, {x}, 22);
}

TEST_CASE("bilinear upsampling matches the half-pixel formula") {
  Rng rng(21);
  const int h = 3, w = 4, f = 4;
  const Tensor x = random_tensor({1, h, w, 2}, rng);
  const Var y = ops::upsample_bilinear(Var(x), f);
  CHECK(y.shape() == Shape{1, h * f, w * f, 2});
  auto src = [&](int o, int n) { return std::clamp((o + 0.5) / f - 0.5, 0.0, n - 1.0); };
  for (int oy = 0; oy < h * f; ++oy) {
    for (int ox = 0; ox < w * f; ++ox) {
      const double sy = src(oy, h), sx = src(ox, w);
      const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
      const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const double ty = sy - y0, tx = sx - x0;
      for (int c = 0; c < 2; ++c) {
        auto at = [&](int yy, int xx) { return x[static_cast<std::size_t>((yy * w + xx) * 2 + c)]; };
        const double ref = (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x1)) + ty * ((1 - tx) * at(y1, x0) + tx * at(y1, x1));
        CHECK(y.value()[static_cast<std::size_t>((oy * w * f + ox) * 2 + c)] == doctest::Approx(ref).epsilon(1e-12));
      }
    }
  }
  expect_grad([](const auto& v) { return ops::upsample_bilinear(v[0], 2); }, {x}, 23);
}

TEST_CASE("window attention op differentiates through qkv and the bias table") {
  Rng rng(22);
  const Tensor qkv = random_tensor({1, 4, 4, 3 * 4}, rng), table = random_tensor({9, 2}, rng);
  expect_grad([](const auto& v) { return ops::window_attention(v[0], v[1], 2, 2, 0, 2); }, {qkv, table}, 24);
  expect_grad([](const auto& v) { return ops::window_attention(v[0], v[1], 2, 2, 1, 2); }, {qkv, table}, 25);
}

TEST_CASE("shared inputs accumulate gradient and inference records no graph") {
  const Var x(Tensor({3}, std::vector<double>{1.0, -2.0, 0.5}), true);
  const Var sq = ops::mul(x, x);
  backward(project(sq, Tensor({3}, 1.0)));
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(-4.0));

  const Var c(Tensor({3}, 1.0));
  const Var out = ops::mul(c, c);
  CHECK(out.node()->inputs.empty());
  CHECK_FALSE(out.requires_grad());
}
