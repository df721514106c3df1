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

// Test-side helpers: random tensors and a central-difference gradient
// checker that never touches the library's backward code paths except
// through the public backward() entry point.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ftn/autograd.hpp"
#include "ftn/random.hpp"

namespace ftn::testing {

Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0);
/// Uniform in [lo, hi).
Tensor uniform_tensor(const Shape& shape, Rng& rng, double lo, double hi);

/// <out, r> as a scalar Var whose backward adds g * r into out's gradient.
Var project(const Var& out, const Tensor& r);

struct GradCheck {
  /// ||analytic - numeric|| / max(||analytic||, ||numeric||), worst input.
  double relative_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst_input;
  std::size_t checked = 0;
  /// Coordinates whose +-h stencil straddles a kink of `kink_probe`.
  std::size_t skipped = 0;
};

using MultiFn = std::function<Var(const std::vector<Var>&)>;

/// Compares d<f(x), r>/dx from backward() with central differences of
/// step `h` on every element of every input. Inputs flagged in `frozen`
/// are held constant. Central differences are meaningless across a kink,
/// so when `kink_probe` is given (it returns the pre-activations of every
/// ReLU involved) coordinates whose stencil flips any of their signs are
/// skipped and counted instead of compared.
GradCheck check_gradients(const MultiFn& f, const std::vector<Tensor>& inputs, std::uint64_t seed, double h = 1e-4,
                          const std::vector<bool>& frozen = {}, const MultiFn& kink_probe = {});

double dot(const Tensor& a, const Tensor& b);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace ftn::testing
