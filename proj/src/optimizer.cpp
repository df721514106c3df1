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

#include "ftn/optimizer.hpp"

#include "ftn/errors.hpp"

namespace ftn {

Sgd::Sgd(ParameterStore& store, double momentum, double weight_decay, double new_layer_multiplier)
    : store_(store), momentum_(momentum), weight_decay_(weight_decay), multiplier_(new_layer_multiplier) {
  velocity_.resize(store_.parameters().size());
}

double Sgd::rate_for(const Parameter& p, double base_lr) const { return p.pretrained ? base_lr : base_lr * multiplier_; }

void Sgd::step(double base_lr) {
  auto& params = store_.parameters();
  if (velocity_.size() != params.size()) throw TrainingError("optimizer: parameter set changed after construction");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (!p.trainable || !p.var.has_grad()) continue;
    Tensor& value = p.var.value_mut();
    const Tensor& grad = p.var.grad();
    Tensor& v = velocity_[i];
    const bool first = v.size() == 0;
    if (first) v = Tensor(value.shape());
    const double lr = rate_for(p, base_lr);
    double* pv = value.data();
    double* vv = v.data();
    const double* g = grad.data();
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double d = g[j] + weight_decay_ * pv[j];
      // The first step seeds the buffer with the gradient itself.
      vv[j] = first ? d : momentum_ * vv[j] + d;
      pv[j] -= lr * vv[j];
    }
  }
}

void Sgd::save_state(Checkpoint& ckpt) const {
  const auto& params = store_.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (velocity_[i].size()) ckpt.tensors.push_back({"opt/" + params[i].name, velocity_[i]});
  }
}

void Sgd::load_state(const Checkpoint& ckpt) {
  const auto& params = store_.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor* t = ckpt.find("opt/" + params[i].name);
    if (!t) {
      velocity_[i] = Tensor();
      continue;
    }
    if (t->shape() != params[i].var.shape()) throw IngestionError("optimizer state for " + params[i].name + " has wrong shape");
    velocity_[i] = *t;
  }
}

}  // namespace ftn
