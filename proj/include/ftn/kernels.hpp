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

// Hot loops of the network. Every kernel has an OpenMP implementation in
// ftn::kernels and an independent serial implementation in
// ftn::kernels::serial that the tests and the benchmark compare against.
//
// Parallel kernels never reduce across threads in a thread-count dependent
// order, so results are bit-identical for any OMP_NUM_THREADS.

#include <vector>

namespace ftn::kernels {

/// c(m x n) = a(m x k) * b(k x n), or c += ... when accumulate is set.
void gemm(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate = false);

/// c(k x n) += a(m x k)^T * b(m x n).
void gemm_at_b(const double* a, const double* b, double* c, int m, int k, int n);

/// out(n x m) = in(m x n)^T.
void transpose(const double* in, double* out, int m, int n);

/// Geometry of a (shifted) window attention call. Height and width must be
/// multiples of window. The relative position table is sized for
/// table_window >= window so one table serves every clamped window size.
struct WindowGeometry {
  int batch = 1;
  int height = 0;
  int width = 0;
  int channels = 0;
  int heads = 1;
  int window = 1;
  int shift = 0;
  int table_window = 1;

  int head_dim() const { return channels / heads; }
  int tokens() const { return window * window; }
  int windows_per_image() const { return (height / window) * (width / window); }
  int table_rows() const { return (2 * table_window - 1) * (2 * table_window - 1); }
  /// Size of the saved attention probabilities: batch*windows*heads*N*N.
  std::size_t probs_size() const;
};

/// qkv is (B, H, W, 3C) with q, k, v stacked along channels. Writes the
/// attended values into out (B, H, W, C) at the original (unshifted) token
/// positions and stores softmax rows into probs for the backward pass.
void window_attention_forward(const WindowGeometry& g, const double* qkv, const double* bias_table, double* out,
                              double* probs);

/// Accumulates into grad_qkv and grad_bias_table (either may be null).
void window_attention_backward(const WindowGeometry& g, const double* qkv, const double* probs, const double* grad_out,
                               double* grad_qkv, double* grad_bias_table);

/// Sums over (2r+1)x(2r+1) windows with mirror padding (edge not repeated),
/// applied independently to `planes` contiguous h x w planes. Requires h, w > r.
void box_sum_reflect(const double* in, double* out, int planes, int h, int w, int radius);

/// Adjoint of box_sum_reflect; accumulates into out.
void box_sum_reflect_adjoint(const double* in, double* out, int planes, int h, int w, int radius);

/// Mirror index used by the box filters.
inline int reflect_index(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

namespace serial {

void gemm(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate = false);
void gemm_at_b(const double* a, const double* b, double* c, int m, int k, int n);
void window_attention_forward(const WindowGeometry& g, const double* qkv, const double* bias_table, double* out,
                              double* probs);
void window_attention_backward(const WindowGeometry& g, const double* qkv, const double* probs, const double* grad_out,
                               double* grad_qkv, double* grad_bias_table);
void box_sum_reflect(const double* in, double* out, int planes, int h, int w, int radius);
void box_sum_reflect_adjoint(const double* in, double* out, int planes, int h, int w, int radius);

}  // namespace serial
}  // namespace ftn::kernels
