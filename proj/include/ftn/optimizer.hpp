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

#include <vector>

#include "ftn/checkpoint.hpp"
#include "ftn/params.hpp"

namespace ftn {

/// SGD with heavy-ball momentum and coupled L2 weight decay:
///   g = grad + wd * p;  v = mu * v + g;  p -= lr * v
/// Pretrained parameters use the base rate, all others base * multiplier.
class Sgd {
 public:
  Sgd(ParameterStore& store, double momentum, double weight_decay, double new_layer_multiplier);

  /// Parameters without a gradient this step are left untouched.
  void step(double base_lr);

  double rate_for(const Parameter& p, double base_lr) const;

  void save_state(Checkpoint& ckpt) const;
  void load_state(const Checkpoint& ckpt);

 private:
  ParameterStore& store_;
  double momentum_;
  double weight_decay_;
  double multiplier_;
  std::vector<Tensor> velocity_;  // parallel to store_.parameters()
};

}  // namespace ftn
