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

// Tape-free reverse-mode differentiation. Each Var is a shared handle to a
// node holding its value, lazily allocated gradient, and a closure that
// pushes its gradient to its inputs. Ops whose inputs need no gradient do
// not record anything, so inference builds no graph.

#include <functional>
#include <memory>
#include <vector>

#include "ftn/tensor.hpp"

namespace ftn {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// Gradient buffer, zero-initialized on first use.
  Tensor& grad_ref();
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  /// Var is a handle: mutation through a const handle is allowed for
  /// parameter updates and running statistics.
  Tensor& value_mut() const { return node_->value; }
  const Tensor& grad() const { return node_->grad_ref(); }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() const { node_->grad = Tensor(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int axis) const { return node_->value.dim(axis); }
  const std::shared_ptr<Node>& node() const { return node_; }

  bool same_node(const Var& other) const { return node_ == other.node_; }

 private:
  std::shared_ptr<Node> node_;
};

using BackwardFn = std::function<void(Node&)>;

/// Wraps an op result; records the closure only when some input needs grad.
Var make_result(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

/// Seeds d(root)/d(root) = 1 (root must hold a single element) and runs
/// every recorded closure in reverse topological order.
void backward(const Var& root);

namespace ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
/// Elementwise sum of equally shaped values.
Var sum(const std::vector<Var>& terms);
/// Weighted sum of single-element values.
Var weighted_sum(const std::vector<Var>& terms, const std::vector<double>& weights);

/// x(..., in) * w(in, out) + bias(out). bias may be undefined.
Var linear(const Var& x, const Var& weight, const Var& bias);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

struct BatchNormState {
  Var running_mean;
  Var running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};
/// Normalizes each channel (last axis) over all other axes. In training
/// mode the batch statistics are used and the running statistics updated.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, const BatchNormState& state, bool training);

Var relu(const Var& x);
Var gelu(const Var& x);
Var sigmoid(const Var& x);

Var concat_channels(const std::vector<Var>& parts);
Var concat_batch(const std::vector<Var>& parts);
Var slice_batch(const Var& x, int begin, int count);

/// 3x3 mean filter, stride 1, zero padding 1 (padding counted in the mean).
Var avg_pool3x3(const Var& x);
/// (B, H, W, C) -> (B, 1, 1, C).
Var global_avg_pool(const Var& x);
/// x(B, H, W, C) scaled per channel by gate(B, 1, 1, C).
Var channel_scale(const Var& x, const Var& gate);

/// (B, H, W, C) -> (B, H/f, W/f, f*f*C); channel block index is dy*f + dx.
Var space_to_depth(const Var& x, int factor);
/// Inverse of space_to_depth.
Var depth_to_space(const Var& x, int factor);
/// Zero pad on the bottom/right to (height, width).
Var pad_hw(const Var& x, int height, int width);
/// Keep the top-left (height, width) block.
Var crop_hw(const Var& x, int height, int width);

/// Fused (shifted) window multi-head attention core on a (B, H, W, 3C)
/// projection. H and W must be multiples of window.
Var window_attention(const Var& qkv, const Var& bias_table, int heads, int window, int shift, int table_window);

/// Bilinear resize by an integer factor (half-pixel centers, edge clamped).
Var upsample_bilinear(const Var& x, int factor);

}  // namespace ops
}  // namespace ftn
