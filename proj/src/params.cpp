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

#include "ftn/params.hpp"

#include "ftn/errors.hpp"

namespace ftn {

Var ParameterStore::add(const std::string& name, Tensor init, bool trainable) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  Var v(std::move(init), trainable);
  index_[name] = params_.size();
  params_.push_back(Parameter{name, v, trainable, false});
  return v;
}

Var ParameterStore::trunc_normal(const std::string& name, Shape shape, double stddev) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) {
    double s = rng_.normal();
    while (s < -2.0 || s > 2.0) s = rng_.normal();
    v = s * stddev;
  }
  return add(name, std::move(t));
}

Var ParameterStore::constant(const std::string& name, Shape shape, double value, bool trainable) {
  return add(name, Tensor(std::move(shape), value), trainable);
}

const Parameter* ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

Parameter* ParameterStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

std::size_t ParameterStore::trainable_size() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.trainable) n += p.var.value().size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

Linear make_linear(ParameterStore& store, const std::string& name, int in, int out, bool bias) {
  Linear l;
  l.weight = store.trunc_normal(name + ".weight", {in, out});
  if (bias) l.bias = store.constant(name + ".bias", {out}, 0.0);
  return l;
}

LayerNorm make_layer_norm(ParameterStore& store, const std::string& name, int channels) {
  return LayerNorm{store.constant(name + ".weight", {channels}, 1.0), store.constant(name + ".bias", {channels}, 0.0)};
}

BatchNorm make_batch_norm(ParameterStore& store, const std::string& name, int channels) {
  BatchNorm bn;
  bn.gamma = store.constant(name + ".weight", {channels}, 1.0);
  bn.beta = store.constant(name + ".bias", {channels}, 0.0);
  bn.state.running_mean = store.constant(name + ".running_mean", {channels}, 0.0, false);
  bn.state.running_var = store.constant(name + ".running_var", {channels}, 1.0, false);
  return bn;
}

}  // namespace ftn
