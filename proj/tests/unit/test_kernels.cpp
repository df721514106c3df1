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
#include <omp.h>

#include <cmath>

#include "ftn/kernels.hpp"
#include "test_support.hpp"

using namespace ftn;
using namespace ftn::testing;
namespace k = ftn::kernels;

namespace {

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

// Naive triple loop, independent of both library implementations.
std::vector<double> naive_gemm(const std::vector<double>& a, const std::vector<double>& b, int m, int kk, int n) {
  std::vector<double> c(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < kk; ++p) c[i * n + j] += a[i * kk + p] * b[p * n + j];
  return c;
}

}  // namespace

TEST_CASE("gemm matches a naive product for ragged sizes") {
  Rng rng(1);
  for (auto [m, kk, n] : {std::tuple{1, 1, 1}, {5, 7, 3}, {17, 33, 9}, {64, 48, 96}}) {
    const auto a = random_vec(static_cast<std::size_t>(m) * kk, rng);
    const auto b = random_vec(static_cast<std::size_t>(kk) * n, rng);
    const auto ref = naive_gemm(a, b, m, kk, n);
    std::vector<double> par(ref.size()), ser(ref.size());
    k::gemm(a.data(), b.data(), par.data(), m, kk, n);
    k::serial::gemm(a.data(), b.data(), ser.data(), m, kk, n);
    CHECK(max_diff(par, ref) < 1e-12);
    CHECK(max_diff(ser, ref) < 1e-12);
    // accumulate adds on top
    k::gemm(a.data(), b.data(), par.data(), m, kk, n, true);
    for (auto& v : ser) v *= 2;
    CHECK(max_diff(par, ser) < 1e-12);
  }
}

TEST_CASE("gemm_at_b accumulates the transposed product") {
  Rng rng(2);
  const int m = 13, kk = 6, n = 11;
  const auto a = random_vec(static_cast<std::size_t>(m) * kk, rng);
  const auto b = random_vec(static_cast<std::size_t>(m) * n, rng);
  std::vector<double> at(static_cast<std::size_t>(kk) * m);
  k::transpose(a.data(), at.data(), m, kk);
  auto ref = naive_gemm(at, b, kk, m, n);
  std::vector<double> par(ref.size(), 1.0), ser(ref.size(), 1.0);
  k::gemm_at_b(a.data(), b.data(), par.data(), m, kk, n);
  k::serial::gemm_at_b(a.data(), b.data(), ser.data(), m, kk, n);
  for (auto& v : ref) v += 1.0;
  CHECK(max_diff(par, ref) < 1e-12);
  CHECK(max_diff(ser, ref) < 1e-12);
}

TEST_CASE("parallel window attention agrees with the serial reference") {
  Rng rng(3);
  for (auto [window, shift, table] : {std::tuple{4, 0, 4}, {4, 2, 4}, {2, 1, 4}, {8, 0, 8}}) {
    k::WindowGeometry g;
    g.batch = 2;
    g.height = 8;
    g.width = 8;
    g.channels = 12;
    g.heads = 3;
    g.window = window;
    g.shift = shift;
    g.table_window = table;
    const std::size_t tokens = static_cast<std::size_t>(g.batch) * g.height * g.width;
    const auto qkv = random_vec(tokens * 3 * g.channels, rng);
    const auto table_v = random_vec(static_cast<std::size_t>(g.table_rows()) * g.heads, rng);
    std::vector<double> out_p(tokens * g.channels), out_s(out_p.size());
    std::vector<double> probs_p(g.probs_size()), probs_s(g.probs_size());
    k::window_attention_forward(g, qkv.data(), table_v.data(), out_p.data(), probs_p.data());
    k::serial::window_attention_forward(g, qkv.data(), table_v.data(), out_s.data(), probs_s.data());
    CHECK(max_diff(out_p, out_s) < 1e-12);

    const auto grad_out = random_vec(out_p.size(), rng);
    std::vector<double> gq_p(qkv.size()), gq_s(qkv.size()), gt_p(table_v.size()), gt_s(table_v.size());
    k::window_attention_backward(g, qkv.data(), probs_p.data(), grad_out.data(), gq_p.data(), gt_p.data());
    k::serial::window_attention_backward(g, qkv.data(), probs_s.data(), grad_out.data(), gq_s.data(), gt_s.data());
    CHECK(max_diff(gq_p, gq_s) < 1e-11);
    CHECK(max_diff(gt_p, gt_s) < 1e-11);
  }
}

TEST_CASE("parallel kernels are bit-identical across thread counts") {
  Rng rng(4);
  k::WindowGeometry g{2, 16, 16, 8, 2, 4, 2, 4};
  const std::size_t tokens = static_cast<std::size_t>(g.batch) * g.height * g.width;
  const auto qkv = random_vec(tokens * 3 * g.channels, rng);
  const auto table_v = random_vec(static_cast<std::size_t>(g.table_rows()) * g.heads, rng);
  const auto grad_out = random_vec(tokens * g.channels, rng);
  const auto a = random_vec(40 * 30, rng), b = random_vec(30 * 50, rng);

  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    std::vector<double> out(tokens * g.channels), probs(g.probs_size()), gq(qkv.size()), gt(table_v.size()),
        c(40 * 50);
    k::window_attention_forward(g, qkv.data(), table_v.data(), out.data(), probs.data());
    k::window_attention_backward(g, qkv.data(), probs.data(), grad_out.data(), gq.data(), gt.data());
    k::gemm(a.data(), b.data(), c.data(), 40, 30, 50);
    out.insert(out.end(), gq.begin(), gq.end());
    out.insert(out.end(), gt.begin(), gt.end());
    out.insert(out.end(), c.begin(), c.end());
    return out;
  };
  const int saved = omp_get_max_threads();
  const auto one = run(1);
  const auto four = run(4);
  omp_set_num_threads(saved);
  CHECK(one == four);
}

TEST_CASE("reflect box sum matches the serial filter and its adjoint") {
  Rng rng(5);
  const int planes = 3, h = 13, w = 17, r = 5;
  const auto x = random_vec(static_cast<std::size_t>(planes) * h * w, rng);
  const auto y = random_vec(x.size(), rng);
  std::vector<double> par(x.size()), ser(x.size());
  k::box_sum_reflect(x.data(), par.data(), planes, h, w, r);
  k::serial::box_sum_reflect(x.data(), ser.data(), planes, h, w, r);
  CHECK(max_diff(par, ser) < 1e-10);

  // <A x, y> == <x, A^T y>
  std::vector<double> aty(x.size(), 0.0), aty_s(x.size(), 0.0);
  k::box_sum_reflect_adjoint(y.data(), aty.data(), planes, h, w, r);
  k::serial::box_sum_reflect_adjoint(y.data(), aty_s.data(), planes, h, w, r);
  CHECK(max_diff(aty, aty_s) < 1e-10);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lhs += par[i] * y[i];
    rhs += x[i] * aty[i];
  }
  CHECK(std::abs(lhs - rhs) < 1e-9 * std::max(1.0, std::abs(lhs)));
}

TEST_CASE("box sum of a constant plane counts window cells") {
  const int h = 12, w = 12, r = 5;
  std::vector<double> ones(static_cast<std::size_t>(h) * w, 1.0), out(ones.size());
  k::box_sum_reflect(ones.data(), out.data(), 1, h, w, r);
  for (double v : out) CHECK(v == doctest::Approx(121.0));
}

TEST_CASE("reflect_index mirrors without repeating the edge") {
  CHECK(k::reflect_index(-1, 5) == 1);
  CHECK(k::reflect_index(-3, 5) == 3);
  CHECK(k::reflect_index(5, 5) == 3);
  CHECK(k::reflect_index(6, 5) == 2);
  CHECK(k::reflect_index(2, 5) == 2);
}
