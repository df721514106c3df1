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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ftn/autograd.hpp"
#include "ftn/random.hpp"

namespace ftn {

struct Parameter {
  std::string name;
  Var var;
  bool trainable = true;
  /// Loaded from a pretrained container; such tensors train at the base
  /// learning rate, everything else at the new-layer multiple.
  bool pretrained = false;
};

/// Owns every named tensor of a model. Modules keep Var handles into the
/// store, so a parameter used in two places (the Siamese branches) is one
/// node, not a copy.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : rng_(seed) {}
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Var add(const std::string& name, Tensor init, bool trainable = true);
  /// Truncated normal at +-2 std.
  Var trunc_normal(const std::string& name, Shape shape, double stddev = 0.02);
  Var constant(const std::string& name, Shape shape, double value, bool trainable = true);

  const std::vector<Parameter>& parameters() const { return params_; }
  std::vector<Parameter>& parameters() { return params_; }
  const Parameter* find(const std::string& name) const;
  Parameter* find(const std::string& name);

  /// Number of trainable scalars.
  std::size_t trainable_size() const;
  void zero_grad();

  Rng& rng() { return rng_; }

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
  Rng rng_;
};

struct Linear {
  Var weight;  // (in, out)
  Var bias;    // (out) or undefined
  Var operator()(const Var& x) const { return ops::linear(x, weight, bias); }
  int in_features() const { return weight.dim(0); }
  int out_features() const { return weight.dim(1); }
};
Linear make_linear(ParameterStore& store, const std::string& name, int in, int out, bool bias = true);

struct LayerNorm {
  Var gamma;
  Var beta;
  Var operator()(const Var& x) const { return ops::layer_norm(x, gamma, beta); }
};
LayerNorm make_layer_norm(ParameterStore& store, const std::string& name, int channels);

struct BatchNorm {
  Var gamma;
  Var beta;
  ops::BatchNormState state;
  Var operator()(const Var& x, bool training) const { return ops::batch_norm(x, gamma, beta, state, training); }
};
BatchNorm make_batch_norm(ParameterStore& store, const std::string& name, int channels);

}  // namespace ftn
