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

// Serial reference kernels against their OpenMP counterparts, on shapes
// taken from the desk and full profiles. Run with OMP_NUM_THREADS set to
// the thread count of interest.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ftn/kernels.hpp"

namespace {

namespace k = ftn::kernels;

std::vector<double> random_values(std::size_t n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  std::vector<double> v(n);
  for (double& x : v) x = dist(gen);
  return v;
}

using GemmFn = void (*)(const double*, const double*, double*, int, int, int, bool);

// Token projections: (tokens x C) * (C x 3C).
void BM_gemm(benchmark::State& state, GemmFn fn) {
  const int m = static_cast<int>(state.range(0)), kk = static_cast<int>(state.range(1)), n = 3 * kk;
  const auto a = random_values(static_cast<std::size_t>(m) * kk, 1);
  const auto b = random_values(static_cast<std::size_t>(kk) * n, 2);
  std::vector<double> c(static_cast<std::size_t>(m) * n);
  for (auto _ : state) {
    fn(a.data(), b.data(), c.data(), m, kk, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * m * kk * n);
}
BENCHMARK_CAPTURE(BM_gemm, serial, &k::serial::gemm)->Args({4096, 32})->Args({9216, 128});
BENCHMARK_CAPTURE(BM_gemm, parallel, &k::gemm)->Args({4096, 32})->Args({9216, 128});

using GemmAtBFn = void (*)(const double*, const double*, double*, int, int, int);

// Weight gradients: (tokens x C)^T * (tokens x 3C).
void BM_gemm_at_b(benchmark::State& state, GemmAtBFn fn) {
  const int m = static_cast<int>(state.range(0)), kk = static_cast<int>(state.range(1)), n = 3 * kk;
  const auto a = random_values(static_cast<std::size_t>(m) * kk, 3);
  const auto b = random_values(static_cast<std::size_t>(m) * n, 4);
  std::vector<double> c(static_cast<std::size_t>(kk) * n);
  for (auto _ : state) {
    fn(a.data(), b.data(), c.data(), m, kk, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * m * kk * n);
}
BENCHMARK_CAPTURE(BM_gemm_at_b, serial, &k::serial::gemm_at_b)->Args({4096, 32})->Args({9216, 128});
BENCHMARK_CAPTURE(BM_gemm_at_b, parallel, &k::gemm_at_b)->Args({4096, 32})->Args({9216, 128});

k::WindowGeometry geometry(const benchmark::State& state) {
  k::WindowGeometry g;
  g.batch = 4;
  g.height = g.width = static_cast<int>(state.range(0));
  g.channels = static_cast<int>(state.range(1));
  g.heads = static_cast<int>(state.range(2));
  g.window = g.table_window = static_cast<int>(state.range(3));
  g.shift = g.window / 2;
  return g;
}

using AttnFwd = void (*)(const k::WindowGeometry&, const double*, const double*, double*, double*);
using AttnBwd = void (*)(const k::WindowGeometry&, const double*, const double*, const double*, double*, double*);

void BM_attention_forward(benchmark::State& state, AttnFwd fn) {
  const k::WindowGeometry g = geometry(state);
  const std::size_t tokens = static_cast<std::size_t>(g.batch) * g.height * g.width;
  const auto qkv = random_values(tokens * 3 * g.channels, 5);
  const auto table = random_values(static_cast<std::size_t>(g.table_rows()) * g.heads, 6);
  std::vector<double> out(tokens * g.channels), probs(g.probs_size());
  for (auto _ : state) {
    fn(g, qkv.data(), table.data(), out.data(), probs.data());
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK_CAPTURE(BM_attention_forward, serial, &k::serial::window_attention_forward)
    ->Args({16, 32, 2, 4})
    ->Args({24, 128, 4, 12});
BENCHMARK_CAPTURE(BM_attention_forward, parallel, &k::window_attention_forward)
    ->Args({16, 32, 2, 4})
    ->Args({24, 128, 4, 12});

void BM_attention_backward(benchmark::State& state, AttnBwd fn) {
  const k::WindowGeometry g = geometry(state);
  const std::size_t tokens = static_cast<std::size_t>(g.batch) * g.height * g.width;
  const auto qkv = random_values(tokens * 3 * g.channels, 7);
  const auto table = random_values(static_cast<std::size_t>(g.table_rows()) * g.heads, 8);
  const auto grad_out = random_values(tokens * g.channels, 9);
  std::vector<double> out(tokens * g.channels), probs(g.probs_size());
  k::serial::window_attention_forward(g, qkv.data(), table.data(), out.data(), probs.data());
  std::vector<double> grad_qkv(qkv.size()), grad_table(table.size());
  for (auto _ : state) {
    fn(g, qkv.data(), probs.data(), grad_out.data(), grad_qkv.data(), grad_table.data());
    benchmark::DoNotOptimize(grad_qkv.data());
  }
}
BENCHMARK_CAPTURE(BM_attention_backward, serial, &k::serial::window_attention_backward)
    ->Args({16, 32, 2, 4})
    ->Args({24, 128, 4, 12});
BENCHMARK_CAPTURE(BM_attention_backward, parallel, &k::window_attention_backward)
    ->Args({16, 32, 2, 4})
    ->Args({24, 128, 4, 12});

using BoxFn = void (*)(const double*, double*, int, int, int, int);

// SSIM statistics: five planes per map, 11x11 window.
void BM_box_sum(benchmark::State& state, BoxFn fn) {
  const int side = static_cast<int>(state.range(0));
  const auto in = random_values(5 * static_cast<std::size_t>(side) * side, 10);
  std::vector<double> out(in.size());
  for (auto _ : state) {
    fn(in.data(), out.data(), 5, side, side, 5);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK_CAPTURE(BM_box_sum, serial, &k::serial::box_sum_reflect)->Arg(64)->Arg(384);
BENCHMARK_CAPTURE(BM_box_sum, parallel, &k::box_sum_reflect)->Arg(64)->Arg(384);

}  // namespace

BENCHMARK_MAIN();
