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

#include "ftn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ftn::kernels {

std::size_t WindowGeometry::probs_size() const {
  return static_cast<std::size_t>(batch) * windows_per_image() * heads * tokens() * tokens();
}

void gemm(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
  // Four rows of c share each streamed row of b. Every c(i, j) still sums
  // over k in order, so the result does not depend on the row position.
  const int blocks = (m + 3) / 4;
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < blocks; ++blk) {
    const int i0 = blk * 4;
    const int rows = std::min(4, m - i0);
    double* cr[4];
    const double* ar[4];
    for (int r = 0; r < 4; ++r) {
      const int i = i0 + std::min(r, rows - 1);
      cr[r] = c + static_cast<std::size_t>(i) * n;
      ar[r] = a + static_cast<std::size_t>(i) * k;
    }
    if (!accumulate) {
      for (int r = 0; r < rows; ++r) std::fill(cr[r], cr[r] + n, 0.0);
    }
    if (rows == 4) {
      double* __restrict c0 = cr[0];
      double* __restrict c1 = cr[1];
      double* __restrict c2 = cr[2];
      double* __restrict c3 = cr[3];
      for (int kk = 0; kk < k; ++kk) {
        const double a0 = ar[0][kk], a1 = ar[1][kk], a2 = ar[2][kk], a3 = ar[3][kk];
        const double* __restrict br = b + static_cast<std::size_t>(kk) * n;
        for (int j = 0; j < n; ++j) {
          const double bv = br[j];
          c0[j] += a0 * bv;
          c1[j] += a1 * bv;
          c2[j] += a2 * bv;
          c3[j] += a3 * bv;
        }
      }
    } else {
      for (int r = 0; r < rows; ++r) {
        double* __restrict cc = cr[r];
        for (int kk = 0; kk < k; ++kk) {
          const double av = ar[r][kk];
          const double* __restrict br = b + static_cast<std::size_t>(kk) * n;
          for (int j = 0; j < n; ++j) cc[j] += av * br[j];
        }
      }
    }
  }
}

void gemm_at_b(const double* a, const double* b, double* c, int m, int k, int n) {
  const int blocks = (k + 3) / 4;
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < blocks; ++blk) {
    const int k0 = blk * 4;
    const int rows = std::min(4, k - k0);
    if (rows == 4) {
      double* __restrict c0 = c + static_cast<std::size_t>(k0) * n;
      double* __restrict c1 = c0 + n;
      double* __restrict c2 = c1 + n;
      double* __restrict c3 = c2 + n;
      for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k + k0;
        const double a0 = ai[0], a1 = ai[1], a2 = ai[2], a3 = ai[3];
        const double* __restrict br = b + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
          const double bv = br[j];
          c0[j] += a0 * bv;
          c1[j] += a1 * bv;
          c2[j] += a2 * bv;
          c3[j] += a3 * bv;
        }
      }
    } else {
      for (int r = 0; r < rows; ++r) {
        double* __restrict cc = c + static_cast<std::size_t>(k0 + r) * n;
        for (int i = 0; i < m; ++i) {
          const double av = a[static_cast<std::size_t>(i) * k + k0 + r];
          const double* __restrict br = b + static_cast<std::size_t>(i) * n;
          for (int j = 0; j < n; ++j) cc[j] += av * br[j];
        }
      }
    }
  }
}

void transpose(const double* in, double* out, int m, int n) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(j) * m + i] = in[static_cast<std::size_t>(i) * n + j];
}

namespace {

int shift_region(int s, int extent, int window, int shift) {
  if (shift == 0) return 0;
  if (s < extent - window) return 0;
  if (s < extent - shift) return 1;
  return 2;
}

struct WindowLayout {
  std::vector<int> relative;  // N*N indices into the bias table rows
  int windows_x = 0;
  int windows = 0;

  explicit WindowLayout(const WindowGeometry& g) {
    const int n = g.tokens();
    const int t = g.table_window;
    const int side = 2 * t - 1;
    relative.resize(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int dy = i / g.window - j / g.window + t - 1;
        const int dx = i % g.window - j % g.window + t - 1;
        relative[static_cast<std::size_t>(i) * n + j] = dy * side + dx;
      }
    }
    windows_x = g.width / g.window;
    windows = g.windows_per_image();
  }

  // Token index (y*W + x) in the unshifted image and mask region for each
  // window position.
  void gather(const WindowGeometry& g, int window, int* token, int* region) const {
    const int wy = window / windows_x;
    const int wx = window % windows_x;
    for (int n = 0; n < g.tokens(); ++n) {
      const int sy = wy * g.window + n / g.window;
      const int sx = wx * g.window + n % g.window;
      const int oy = (sy + g.shift) % g.height;
      const int ox = (sx + g.shift) % g.width;
      token[n] = oy * g.width + ox;
      region[n] = shift_region(sy, g.height, g.window, g.shift) * 3 + shift_region(sx, g.width, g.window, g.shift);
    }
  }
};

}  // namespace

void window_attention_forward(const WindowGeometry& g, const double* qkv, const double* bias_table, double* out,
                              double* probs) {
  const WindowLayout layout(g);
  const int n = g.tokens();
  const int d = g.head_dim();
  const int c = g.channels;
  const int c3 = 3 * c;
  const std::size_t hw = static_cast<std::size_t>(g.height) * g.width;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const double neg_inf = -std::numeric_limits<double>::infinity();
  const int total = g.batch * layout.windows;

#pragma omp parallel
  {
    std::vector<int> token(static_cast<std::size_t>(n));
    std::vector<int> region(static_cast<std::size_t>(n));
#pragma omp for schedule(static)
    for (int bw = 0; bw < total; ++bw) {
      const int b = bw / layout.windows;
      layout.gather(g, bw % layout.windows, token.data(), region.data());
      const double* base = qkv + static_cast<std::size_t>(b) * hw * c3;
      double* obase = out + static_cast<std::size_t>(b) * hw * c;
      for (int h = 0; h < g.heads; ++h) {
        double* p = probs + (static_cast<std::size_t>(bw) * g.heads + h) * n * n;
        for (int i = 0; i < n; ++i) {
          const double* q = base + static_cast<std::size_t>(token[i]) * c3 + h * d;
          double* row = p + static_cast<std::size_t>(i) * n;
          double row_max = neg_inf;
          for (int j = 0; j < n; ++j) {
            if (region[i] != region[j]) {
              row[j] = neg_inf;
              continue;
            }
            const double* kv = base + static_cast<std::size_t>(token[j]) * c3 + c + h * d;
            double dot = 0.0;
            for (int e = 0; e < d; ++e) dot += q[e] * kv[e];
            row[j] = dot * scale + bias_table[static_cast<std::size_t>(layout.relative[i * n + j]) * g.heads + h];
            row_max = std::max(row_max, row[j]);
          }
          double denom = 0.0;
          for (int j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - row_max);
            denom += row[j];
          }
          const double inv = 1.0 / denom;
          double* o = obase + static_cast<std::size_t>(token[i]) * c + h * d;
          std::fill(o, o + d, 0.0);
          for (int j = 0; j < n; ++j) {
            row[j] *= inv;
            const double pj = row[j];
            const double* v = base + static_cast<std::size_t>(token[j]) * c3 + 2 * c + h * d;
            for (int e = 0; e < d; ++e) o[e] += pj * v[e];
          }
        }
      }
    }
  }
}

void window_attention_backward(const WindowGeometry& g, const double* qkv, const double* probs, const double* grad_out,
                               double* grad_qkv, double* grad_bias_table) {
  const WindowLayout layout(g);
  const int n = g.tokens();
  const int d = g.head_dim();
  const int c = g.channels;
  const int c3 = 3 * c;
  const std::size_t hw = static_cast<std::size_t>(g.height) * g.width;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const int total = g.batch * layout.windows;
  const std::size_t table_size = static_cast<std::size_t>(g.table_rows()) * g.heads;

  // Per-window bias partials, reduced in window order afterwards.
  std::vector<double> bias_partial;
  if (grad_bias_table) bias_partial.assign(static_cast<std::size_t>(total) * table_size, 0.0);

#pragma omp parallel
  {
    std::vector<int> token(static_cast<std::size_t>(n));
    std::vector<int> region(static_cast<std::size_t>(n));
    std::vector<double> ds(static_cast<std::size_t>(n));
#pragma omp for schedule(static)
    for (int bw = 0; bw < total; ++bw) {
      const int b = bw / layout.windows;
      layout.gather(g, bw % layout.windows, token.data(), region.data());
      const double* base = qkv + static_cast<std::size_t>(b) * hw * c3;
      const double* gbase = grad_out + static_cast<std::size_t>(b) * hw * c;
      double* gq = grad_qkv ? grad_qkv + static_cast<std::size_t>(b) * hw * c3 : nullptr;
      double* partial = grad_bias_table ? bias_partial.data() + static_cast<std::size_t>(bw) * table_size : nullptr;
      for (int h = 0; h < g.heads; ++h) {
        const double* p = probs + (static_cast<std::size_t>(bw) * g.heads + h) * n * n;
        for (int i = 0; i < n; ++i) {
          const double* row = p + static_cast<std::size_t>(i) * n;
          const double* go = gbase + static_cast<std::size_t>(token[i]) * c + h * d;
          double rowdot = 0.0;
          for (int j = 0; j < n; ++j) {
            const double* v = base + static_cast<std::size_t>(token[j]) * c3 + 2 * c + h * d;
            double dp = 0.0;
            for (int e = 0; e < d; ++e) dp += go[e] * v[e];
            ds[j] = dp;
            rowdot += row[j] * dp;
          }
          for (int j = 0; j < n; ++j) ds[j] = row[j] * (ds[j] - rowdot);
          if (partial) {
            for (int j = 0; j < n; ++j) {
              partial[static_cast<std::size_t>(layout.relative[i * n + j]) * g.heads + h] += ds[j];
            }
          }
          if (!gq) continue;
          const double* q = base + static_cast<std::size_t>(token[i]) * c3 + h * d;
          double* dq = gq + static_cast<std::size_t>(token[i]) * c3 + h * d;
          for (int j = 0; j < n; ++j) {
            const double s = ds[j] * scale;
            const double pj = row[j];
            const double* kv = base + static_cast<std::size_t>(token[j]) * c3 + c + h * d;
            double* dk = gq + static_cast<std::size_t>(token[j]) * c3 + c + h * d;
            double* dv = dk + c;
            for (int e = 0; e < d; ++e) {
              dq[e] += s * kv[e];
              dk[e] += s * q[e];
              dv[e] += pj * go[e];
            }
          }
        }
      }
    }
  }

  if (grad_bias_table) {
    for (int bw = 0; bw < total; ++bw) {
      const double* partial = bias_partial.data() + static_cast<std::size_t>(bw) * table_size;
      for (std::size_t t = 0; t < table_size; ++t) grad_bias_table[t] += partial[t];
    }
  }
}

void box_sum_reflect(const double* in, double* out, int planes, int h, int w, int radius) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
#pragma omp parallel
  {
    std::vector<double> rows(plane);
#pragma omp for schedule(static)
    for (int p = 0; p < planes; ++p) {
      const double* src = in + p * plane;
      double* dst = out + p * plane;
      for (int y = 0; y < h; ++y) {
        const double* r = src + static_cast<std::size_t>(y) * w;
        double* t = rows.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
          double s = 0.0;
          for (int dx = -radius; dx <= radius; ++dx) s += r[reflect_index(x + dx, w)];
          t[x] = s;
        }
      }
      for (int y = 0; y < h; ++y) {
        double* o = dst + static_cast<std::size_t>(y) * w;
        std::fill(o, o + w, 0.0);
        for (int dy = -radius; dy <= radius; ++dy) {
          const double* t = rows.data() + static_cast<std::size_t>(reflect_index(y + dy, h)) * w;
          for (int x = 0; x < w; ++x) o[x] += t[x];
        }
      }
    }
  }
}

void box_sum_reflect_adjoint(const double* in, double* out, int planes, int h, int w, int radius) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
#pragma omp parallel
  {
    std::vector<double> rows(plane);
#pragma omp for schedule(static)
    for (int p = 0; p < planes; ++p) {
      const double* src = in + p * plane;
      double* dst = out + p * plane;
      std::fill(rows.begin(), rows.end(), 0.0);
      for (int y = 0; y < h; ++y) {
        const double* g = src + static_cast<std::size_t>(y) * w;
        for (int dy = -radius; dy <= radius; ++dy) {
          double* t = rows.data() + static_cast<std::size_t>(reflect_index(y + dy, h)) * w;
          for (int x = 0; x < w; ++x) t[x] += g[x];
        }
      }
      for (int y = 0; y < h; ++y) {
        const double* t = rows.data() + static_cast<std::size_t>(y) * w;
        double* o = dst + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
          for (int dx = -radius; dx <= radius; ++dx) o[reflect_index(x + dx, w)] += t[x];
        }
      }
    }
  }
}

}  // namespace ftn::kernels
