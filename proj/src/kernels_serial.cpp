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

// Straightforward reference versions of the kernels. The window attention
// here follows the textbook recipe literally: roll the grid, cut it into
// windows, build the shift mask as a matrix, attend, merge, roll back.

#include <cmath>
#include <limits>

#include "ftn/kernels.hpp"

namespace ftn::kernels::serial {

void gemm(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int kk = 0; kk < k; ++kk) s += a[static_cast<std::size_t>(i) * k + kk] * b[static_cast<std::size_t>(kk) * n + j];
      double& out = c[static_cast<std::size_t>(i) * n + j];
      out = accumulate ? out + s : s;
    }
  }
}

void gemm_at_b(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int kk = 0; kk < k; ++kk) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = 0; i < m; ++i) s += a[static_cast<std::size_t>(i) * k + kk] * b[static_cast<std::size_t>(i) * n + j];
      c[static_cast<std::size_t>(kk) * n + j] += s;
    }
  }
}

namespace {

struct Partition {
  // window_tokens[w][n] = flat (y*W + x) index of the unshifted grid.
  std::vector<std::vector<int>> window_tokens;
  // mask[w][i*N + j] is true when tokens i and j must not attend.
  std::vector<std::vector<bool>> mask;
};

Partition partition(const WindowGeometry& g) {
  const int hgt = g.height, wid = g.width, ws = g.window, s = g.shift;
  // Label image regions exactly as the reference implementation slices them.
  std::vector<int> label(static_cast<std::size_t>(hgt) * wid, 0);
  if (s > 0) {
    const int ybounds[4] = {0, hgt - ws, hgt - s, hgt};
    const int xbounds[4] = {0, wid - ws, wid - s, wid};
    int cnt = 0;
    for (int ry = 0; ry < 3; ++ry) {
      for (int rx = 0; rx < 3; ++rx) {
        for (int y = ybounds[ry]; y < ybounds[ry + 1]; ++y)
          for (int x = xbounds[rx]; x < xbounds[rx + 1]; ++x) label[static_cast<std::size_t>(y) * wid + x] = cnt;
        ++cnt;
      }
    }
  }
  Partition p;
  const int nwy = hgt / ws, nwx = wid / ws, n = ws * ws;
  for (int wy = 0; wy < nwy; ++wy) {
    for (int wx = 0; wx < nwx; ++wx) {
      std::vector<int> tokens;
      std::vector<int> labels;
      for (int iy = 0; iy < ws; ++iy) {
        for (int ix = 0; ix < ws; ++ix) {
          const int sy = wy * ws + iy, sx = wx * ws + ix;
          // roll by -shift: shifted[sy] = original[(sy + shift) mod H]
          int oy = sy + s;
          if (oy >= hgt) oy -= hgt;
          int ox = sx + s;
          if (ox >= wid) ox -= wid;
          tokens.push_back(oy * wid + ox);
          labels.push_back(label[static_cast<std::size_t>(sy) * wid + sx]);
        }
      }
      std::vector<bool> m(static_cast<std::size_t>(n) * n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m[static_cast<std::size_t>(i) * n + j] = labels[i] != labels[j];
      p.window_tokens.push_back(std::move(tokens));
      p.mask.push_back(std::move(m));
    }
  }
  return p;
}

int bias_row(const WindowGeometry& g, int i, int j) {
  const int t = g.table_window;
  const int iy = i / g.window, ix = i % g.window, jy = j / g.window, jx = j % g.window;
  return (iy - jy + t - 1) * (2 * t - 1) + (ix - jx + t - 1);
}

}  // namespace

void window_attention_forward(const WindowGeometry& g, const double* qkv, const double* bias_table, double* out,
                              double* probs) {
  const Partition part = partition(g);
  const int n = g.tokens(), d = g.head_dim(), c = g.channels, nw = g.windows_per_image();
  const std::size_t hw = static_cast<std::size_t>(g.height) * g.width;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int b = 0; b < g.batch; ++b) {
    for (int w = 0; w < nw; ++w) {
      const auto& tok = part.window_tokens[static_cast<std::size_t>(w)];
      for (int h = 0; h < g.heads; ++h) {
        auto at = [&](int token, int which, int e) {
          return qkv[(b * hw + static_cast<std::size_t>(tok[static_cast<std::size_t>(token)])) * 3 * c + which * c + h * d + e];
        };
        double* p = probs + ((static_cast<std::size_t>(b) * nw + w) * g.heads + h) * n * n;
        for (int i = 0; i < n; ++i) {
          std::vector<double> logits(static_cast<std::size_t>(n));
          for (int j = 0; j < n; ++j) {
            if (part.mask[static_cast<std::size_t>(w)][static_cast<std::size_t>(i) * n + j]) {
              logits[static_cast<std::size_t>(j)] = -std::numeric_limits<double>::infinity();
              continue;
            }
            double dot = 0.0;
            for (int e = 0; e < d; ++e) dot += at(i, 0, e) * scale * at(j, 1, e);
            logits[static_cast<std::size_t>(j)] = dot + bias_table[static_cast<std::size_t>(bias_row(g, i, j)) * g.heads + h];
          }
          double mx = -std::numeric_limits<double>::infinity();
          for (double v : logits) mx = std::max(mx, v);
          double z = 0.0;
          for (double v : logits) z += std::exp(v - mx);
          for (int j = 0; j < n; ++j) p[static_cast<std::size_t>(i) * n + j] = std::exp(logits[static_cast<std::size_t>(j)] - mx) / z;
          for (int e = 0; e < d; ++e) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += p[static_cast<std::size_t>(i) * n + j] * at(j, 2, e);
            out[(b * hw + static_cast<std::size_t>(tok[static_cast<std::size_t>(i)])) * c + h * d + e] = s;
          }
        }
      }
    }
  }
}

void window_attention_backward(const WindowGeometry& g, const double* qkv, const double* probs, const double* grad_out,
                               double* grad_qkv, double* grad_bias_table) {
  const Partition part = partition(g);
  const int n = g.tokens(), d = g.head_dim(), c = g.channels, nw = g.windows_per_image();
  const std::size_t hw = static_cast<std::size_t>(g.height) * g.width;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int b = 0; b < g.batch; ++b) {
    for (int w = 0; w < nw; ++w) {
      const auto& tok = part.window_tokens[static_cast<std::size_t>(w)];
      auto idx = [&](int token, int which, int h, int e) {
        return (b * hw + static_cast<std::size_t>(tok[static_cast<std::size_t>(token)])) * 3 * c + which * c + h * d + e;
      };
      for (int h = 0; h < g.heads; ++h) {
        const double* p = probs + ((static_cast<std::size_t>(b) * nw + w) * g.heads + h) * n * n;
        // dP = dO V^T, dS = P .* (dP - rowsum(P .* dP))
        std::vector<double> dp(static_cast<std::size_t>(n) * n), ds(static_cast<std::size_t>(n) * n);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int e = 0; e < d; ++e)
              s += grad_out[(b * hw + static_cast<std::size_t>(tok[static_cast<std::size_t>(i)])) * c + h * d + e] *
                   qkv[idx(j, 2, h, e)];
            dp[static_cast<std::size_t>(i) * n + j] = s;
          }
        }
        for (int i = 0; i < n; ++i) {
          double r = 0.0;
          for (int j = 0; j < n; ++j) r += p[static_cast<std::size_t>(i) * n + j] * dp[static_cast<std::size_t>(i) * n + j];
          for (int j = 0; j < n; ++j)
            ds[static_cast<std::size_t>(i) * n + j] = p[static_cast<std::size_t>(i) * n + j] * (dp[static_cast<std::size_t>(i) * n + j] - r);
        }
        if (grad_bias_table) {
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              grad_bias_table[static_cast<std::size_t>(bias_row(g, i, j)) * g.heads + h] += ds[static_cast<std::size_t>(i) * n + j];
        }
        if (!grad_qkv) continue;
        for (int i = 0; i < n; ++i) {
          for (int e = 0; e < d; ++e) {
            double gq = 0.0, gk = 0.0, gv = 0.0;
            for (int j = 0; j < n; ++j) {
              gq += ds[static_cast<std::size_t>(i) * n + j] * qkv[idx(j, 1, h, e)];
              gk += ds[static_cast<std::size_t>(j) * n + i] * qkv[idx(j, 0, h, e)];
              gv += p[static_cast<std::size_t>(j) * n + i] *
                    grad_out[(b * hw + static_cast<std::size_t>(tok[static_cast<std::size_t>(j)])) * c + h * d + e];
            }
            grad_qkv[idx(i, 0, h, e)] += gq * scale;
            grad_qkv[idx(i, 1, h, e)] += gk * scale;
            grad_qkv[idx(i, 2, h, e)] += gv;
          }
        }
      }
    }
  }
}

void box_sum_reflect(const double* in, double* out, int planes, int h, int w, int radius) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int p = 0; p < planes; ++p) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int dy = -radius; dy <= radius; ++dy)
          for (int dx = -radius; dx <= radius; ++dx)
            s += in[p * plane + static_cast<std::size_t>(reflect_index(y + dy, h)) * w + reflect_index(x + dx, w)];
        out[p * plane + static_cast<std::size_t>(y) * w + x] = s;
      }
    }
  }
}

void box_sum_reflect_adjoint(const double* in, double* out, int planes, int h, int w, int radius) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int p = 0; p < planes; ++p) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double g = in[p * plane + static_cast<std::size_t>(y) * w + x];
        for (int dy = -radius; dy <= radius; ++dy)
          for (int dx = -radius; dx <= radius; ++dx)
            out[p * plane + static_cast<std::size_t>(reflect_index(y + dy, h)) * w + reflect_index(x + dx, w)] += g;
      }
    }
  }
}

}  // namespace ftn::kernels::serial
