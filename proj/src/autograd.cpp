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

#include "ftn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "ftn/errors.hpp"
#include "ftn/kernels.hpp"

namespace ftn {

Tensor& Node::grad_ref() {
  if (grad.empty() && !value.empty()) grad = Tensor(value.shape());
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var make_result(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const Var& in : inputs) {
    if (in.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (const Var& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(fn);
  }
  return Var(std::move(node));
}

void backward(const Var& root) {
  if (!root.defined() || root.value().size() != 1) throw InvalidInput("backward needs a single-element root");
  if (!root.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child && child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad_ref()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

namespace ops {
namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvalidInput(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                       shape_string(b.shape()));
  }
}

void require_rank4(const Var& x, const char* op) {
  if (x.value().rank() != 4) throw InvalidInput(std::string(op) + ": expected (B, H, W, C), got " + shape_string(x.shape()));
}

bool wants(const Node& n, std::size_t i) { return n.inputs[i] && n.inputs[i]->requires_grad; }

std::size_t rows_of(const Tensor& t) { return t.size() / static_cast<std::size_t>(t.shape().back()); }

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  out += b.value();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i)
      if (wants(self, i)) self.inputs[i]->grad_ref() += self.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (wants(self, 0)) self.inputs[0]->grad_ref() += self.grad;
    if (wants(self, 1)) {
      Tensor& g = self.inputs[1]->grad_ref();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.inputs[0]->value;
    const Tensor& bv = self.inputs[1]->value;
    if (wants(self, 0)) {
      Tensor& g = self.inputs[0]->grad_ref();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (wants(self, 1)) {
      Tensor& g = self.inputs[1]->grad_ref();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return make_result(std::move(out), {a}, [factor](Node& self) {
    Tensor& g = self.inputs[0]->grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Var sum(const std::vector<Var>& terms) {
  if (terms.empty()) throw InvalidInput("sum of no terms");
  Tensor out = terms.front().value();
  for (std::size_t t = 1; t < terms.size(); ++t) {
    require_same_shape(terms.front(), terms[t], "sum");
    out += terms[t].value();
  }
  return make_result(std::move(out), terms, [](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i)
      if (wants(self, i)) self.inputs[i]->grad_ref() += self.grad;
  });
}

Var weighted_sum(const std::vector<Var>& terms, const std::vector<double>& weights) {
  if (terms.size() != weights.size() || terms.empty()) throw InvalidInput("weighted_sum: terms/weights mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].value().size() != 1) throw InvalidInput("weighted_sum expects single-element terms");
    total += weights[i] * terms[i].value()[0];
  }
  return make_result(Tensor({1}, total), terms, [weights](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i)
      if (wants(self, i)) self.inputs[i]->grad_ref()[0] += weights[i] * self.grad[0];
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& w = weight.value();
  if (w.rank() != 2) throw ConfigError("linear: weight must be (in, out)");
  const int in = w.dim(0);
  const int out = w.dim(1);
  if (x.shape().back() != in) {
    throw ConfigError("linear: input has " + std::to_string(x.shape().back()) + " channels, weight expects " +
                      std::to_string(in));
  }
  if (bias.defined() && bias.value().size() != static_cast<std::size_t>(out)) throw ConfigError("linear: bias size");
  const int rows = static_cast<int>(rows_of(x.value()));
  Shape shape = x.shape();
  shape.back() = out;
  Tensor y(shape);
  kernels::gemm(x.value().data(), w.data(), y.data(), rows, in, out);
  if (bias.defined()) {
    const double* b = bias.value().data();
    for (int r = 0; r < rows; ++r) {
      double* yr = y.data() + static_cast<std::size_t>(r) * out;
      for (int j = 0; j < out; ++j) yr[j] += b[j];
    }
  }
  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(std::move(y), inputs, [rows, in, out](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    const Tensor& wv = self.inputs[1]->value;
    if (wants(self, 0)) {
      std::vector<double> wt(static_cast<std::size_t>(in) * out);
      kernels::transpose(wv.data(), wt.data(), in, out);
      kernels::gemm(self.grad.data(), wt.data(), self.inputs[0]->grad_ref().data(), rows, out, in, true);
    }
    if (wants(self, 1)) kernels::gemm_at_b(xv.data(), self.grad.data(), self.inputs[1]->grad_ref().data(), rows, in, out);
    if (self.inputs.size() > 2 && wants(self, 2)) {
      double* gb = self.inputs[2]->grad_ref().data();
      for (int r = 0; r < rows; ++r) {
        const double* g = self.grad.data() + static_cast<std::size_t>(r) * out;
        for (int j = 0; j < out; ++j) gb[j] += g[j];
      }
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const int c = x.shape().back();
  if (gamma.value().size() != static_cast<std::size_t>(c) || beta.value().size() != static_cast<std::size_t>(c)) {
    throw ConfigError("layer_norm: affine size does not match channels");
  }
  const int rows = static_cast<int>(rows_of(x.value()));
  Tensor y(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(x.value().size());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
  const double* xv = x.value().data();
  const double* gv = gamma.value().data();
  const double* bv = beta.value().data();
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double* xr = xv + static_cast<std::size_t>(r) * c;
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += xr[j];
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= c;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(r)] = is;
    double* hr = xhat->data() + static_cast<std::size_t>(r) * c;
    double* yr = y.data() + static_cast<std::size_t>(r) * c;
    for (int j = 0; j < c; ++j) {
      hr[j] = (xr[j] - mean) * is;
      yr[j] = hr[j] * gv[j] + bv[j];
    }
  }
  return make_result(std::move(y), {x, gamma, beta}, [xhat, inv_std, rows, c](Node& self) {
    const double* g = self.grad.data();
    const double* gv = self.inputs[1]->value.data();
    if (wants(self, 0)) {
      double* gx = self.inputs[0]->grad_ref().data();
#pragma omp parallel for schedule(static)
      for (int r = 0; r < rows; ++r) {
        const double* gr = g + static_cast<std::size_t>(r) * c;
        const double* hr = xhat->data() + static_cast<std::size_t>(r) * c;
        double m1 = 0.0, m2 = 0.0;
        for (int j = 0; j < c; ++j) {
          const double dh = gr[j] * gv[j];
          m1 += dh;
          m2 += dh * hr[j];
        }
        m1 /= c;
        m2 /= c;
        const double is = (*inv_std)[static_cast<std::size_t>(r)];
        double* out = gx + static_cast<std::size_t>(r) * c;
        for (int j = 0; j < c; ++j) out[j] += is * (gr[j] * gv[j] - m1 - hr[j] * m2);
      }
    }
    if (wants(self, 1) || wants(self, 2)) {
      double* gg = wants(self, 1) ? self.inputs[1]->grad_ref().data() : nullptr;
      double* gb = wants(self, 2) ? self.inputs[2]->grad_ref().data() : nullptr;
      for (int r = 0; r < rows; ++r) {
        const double* gr = g + static_cast<std::size_t>(r) * c;
        const double* hr = xhat->data() + static_cast<std::size_t>(r) * c;
        for (int j = 0; j < c; ++j) {
          if (gg) gg[j] += gr[j] * hr[j];
          if (gb) gb[j] += gr[j];
        }
      }
    }
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, const BatchNormState& state, bool training) {
  const int c = x.shape().back();
  const std::size_t rows = rows_of(x.value());
  if (gamma.value().size() != static_cast<std::size_t>(c)) throw ConfigError("batch_norm: affine size mismatch");
  Tensor& running_mean = state.running_mean.value_mut();
  Tensor& running_var = state.running_var.value_mut();
  std::vector<double> mean(static_cast<std::size_t>(c), 0.0), var(static_cast<std::size_t>(c), 0.0);
  const double* xv = x.value().data();
  if (training) {
    if (rows < 2) throw InvalidInput("batch_norm: training needs more than one value per channel");
    for (std::size_t r = 0; r < rows; ++r)
      for (int j = 0; j < c; ++j) mean[static_cast<std::size_t>(j)] += xv[r * c + j];
    for (double& m : mean) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (int j = 0; j < c; ++j) {
        const double d = xv[r * c + j] - mean[static_cast<std::size_t>(j)];
        var[static_cast<std::size_t>(j)] += d * d;
      }
    for (double& v : var) v /= static_cast<double>(rows);
    const double unbias = static_cast<double>(rows) / static_cast<double>(rows - 1);
    for (int j = 0; j < c; ++j) {
      running_mean[static_cast<std::size_t>(j)] =
          (1.0 - state.momentum) * running_mean[static_cast<std::size_t>(j)] + state.momentum * mean[static_cast<std::size_t>(j)];
      running_var[static_cast<std::size_t>(j)] = (1.0 - state.momentum) * running_var[static_cast<std::size_t>(j)] +
                                                 state.momentum * var[static_cast<std::size_t>(j)] * unbias;
    }
  } else {
    for (int j = 0; j < c; ++j) {
      mean[static_cast<std::size_t>(j)] = running_mean[static_cast<std::size_t>(j)];
      var[static_cast<std::size_t>(j)] = running_var[static_cast<std::size_t>(j)];
    }
  }
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(c));
  for (int j = 0; j < c; ++j) (*inv_std)[static_cast<std::size_t>(j)] = 1.0 / std::sqrt(var[static_cast<std::size_t>(j)] + state.eps);
  auto xhat = std::make_shared<Tensor>(x.shape());
  Tensor y(x.shape());
  const double* gv = gamma.value().data();
  const double* bv = beta.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (int j = 0; j < c; ++j) {
      const double h = (xv[r * c + j] - mean[static_cast<std::size_t>(j)]) * (*inv_std)[static_cast<std::size_t>(j)];
      (*xhat)[r * c + j] = h;
      y[r * c + j] = gv[j] * h + bv[j];
    }
  }
  return make_result(std::move(y), {x, gamma, beta}, [xhat, inv_std, rows, c, training](Node& self) {
    const double* g = self.grad.data();
    const double* gv = self.inputs[1]->value.data();
    std::vector<double> sum_g(static_cast<std::size_t>(c), 0.0), sum_gh(static_cast<std::size_t>(c), 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (int j = 0; j < c; ++j) {
        sum_g[static_cast<std::size_t>(j)] += g[r * c + j];
        sum_gh[static_cast<std::size_t>(j)] += g[r * c + j] * (*xhat)[r * c + j];
      }
    if (wants(self, 0)) {
      double* gx = self.inputs[0]->grad_ref().data();
      const double n = static_cast<double>(rows);
      for (std::size_t r = 0; r < rows; ++r)
        for (int j = 0; j < c; ++j) {
          const auto jj = static_cast<std::size_t>(j);
          const double k = gv[j] * (*inv_std)[jj];
          if (training) {
            gx[r * c + j] += k * (g[r * c + j] - sum_g[jj] / n - (*xhat)[r * c + j] * sum_gh[jj] / n);
          } else {
            gx[r * c + j] += k * g[r * c + j];
          }
        }
    }
    if (wants(self, 1)) {
      double* gg = self.inputs[1]->grad_ref().data();
      for (int j = 0; j < c; ++j) gg[j] += sum_gh[static_cast<std::size_t>(j)];
    }
    if (wants(self, 2)) {
      double* gb = self.inputs[2]->grad_ref().data();
      for (int j = 0; j < c; ++j) gb[j] += sum_g[static_cast<std::size_t>(j)];
    }
  });
}

Var relu(const Var& x) {
  Tensor y = x.value();
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return make_result(std::move(y), {x}, [](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    Tensor& g = self.inputs[0]->grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) g[i] += self.grad[i];
  });
}

Var gelu(const Var& x) {
  Tensor y = x.value();
  for (double& v : y.values()) v = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
  return make_result(std::move(y), {x}, [](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    Tensor& g = self.inputs[0]->grad_ref();
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = xv[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
      g[i] += self.grad[i] * (cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v));
    }
  });
}

Var sigmoid(const Var& x) {
  Tensor y = x.value();
  for (double& v : y.values()) {
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  auto out = std::make_shared<Tensor>(y);
  return make_result(std::move(y), {x}, [out](Node& self) {
    Tensor& g = self.inputs[0]->grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (*out)[i] * (1.0 - (*out)[i]);
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidInput("concat_channels: nothing to concatenate");
  const std::size_t rows = rows_of(parts.front().value());
  std::vector<int> widths;
  int total = 0;
  for (const Var& p : parts) {
    Shape lead = p.shape();
    lead.pop_back();
    Shape first = parts.front().shape();
    first.pop_back();
    if (lead != first) throw InvalidInput("concat_channels: leading dimensions differ");
    widths.push_back(p.shape().back());
    total += p.shape().back();
  }
  Shape shape = parts.front().shape();
  shape.back() = total;
  Tensor y(shape);
  int offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double* src = parts[k].value().data();
    const int w = widths[k];
    for (std::size_t r = 0; r < rows; ++r) std::copy(src + r * w, src + (r + 1) * w, y.data() + r * total + offset);
    offset += w;
  }
  return make_result(std::move(y), parts, [widths, rows, total](Node& self) {
    int offset = 0;
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      const int w = widths[k];
      if (wants(self, k)) {
        double* g = self.inputs[k]->grad_ref().data();
        for (std::size_t r = 0; r < rows; ++r)
          for (int j = 0; j < w; ++j) g[r * w + j] += self.grad[r * total + offset + j];
      }
      offset += w;
    }
  });
}

Var concat_batch(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidInput("concat_batch: nothing to concatenate");
  Shape shape = parts.front().shape();
  int batch = 0;
  for (const Var& p : parts) {
    Shape a = p.shape(), b = shape;
    a[0] = b[0] = 0;
    if (a != b) throw InvalidInput("concat_batch: trailing dimensions differ");
    batch += p.shape()[0];
  }
  shape[0] = batch;
  Tensor y(shape);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(), y.data() + offset);
    offset += p.value().size();
  }
  return make_result(std::move(y), parts, [](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      const std::size_t n = self.inputs[k]->value.size();
      if (wants(self, k)) {
        double* g = self.inputs[k]->grad_ref().data();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

Var slice_batch(const Var& x, int begin, int count) {
  const int batch = x.shape()[0];
  if (begin < 0 || count < 1 || begin + count > batch) throw InvalidInput("slice_batch: range out of bounds");
  Shape shape = x.shape();
  shape[0] = count;
  const std::size_t per = x.value().size() / static_cast<std::size_t>(batch);
  const std::size_t start = per * static_cast<std::size_t>(begin);
  Tensor y(shape);
  std::copy(x.value().data() + start, x.value().data() + start + y.size(), y.data());
  return make_result(std::move(y), {x}, [start](Node& self) {
    double* g = self.inputs[0]->grad_ref().data() + start;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Var avg_pool3x3(const Var& x) {
  require_rank4(x, "avg_pool3x3");
  const int b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  Tensor y(x.shape());
  const double* xv = x.value().data();
  for (int n = 0; n < b; ++n)
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        double* out = y.data() + ((static_cast<std::size_t>(n) * h + yy) * w + xx) * c;
        for (int dy = -1; dy <= 1; ++dy) {
          const int sy = yy + dy;
          if (sy < 0 || sy >= h) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int sx = xx + dx;
            if (sx < 0 || sx >= w) continue;
            const double* in = xv + ((static_cast<std::size_t>(n) * h + sy) * w + sx) * c;
            for (int j = 0; j < c; ++j) out[j] += in[j];
          }
        }
        for (int j = 0; j < c; ++j) out[j] /= 9.0;
      }
  return make_result(std::move(y), {x}, [b, h, w, c](Node& self) {
    double* g = self.inputs[0]->grad_ref().data();
    for (int n = 0; n < b; ++n)
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) {
          const double* go = self.grad.data() + ((static_cast<std::size_t>(n) * h + yy) * w + xx) * c;
          for (int dy = -1; dy <= 1; ++dy) {
            const int sy = yy + dy;
            if (sy < 0 || sy >= h) continue;
            for (int dx = -1; dx <= 1; ++dx) {
              const int sx = xx + dx;
              if (sx < 0 || sx >= w) continue;
              double* gi = g + ((static_cast<std::size_t>(n) * h + sy) * w + sx) * c;
              for (int j = 0; j < c; ++j) gi[j] += go[j] / 9.0;
            }
          }
        }
  });
}

Var global_avg_pool(const Var& x) {
  require_rank4(x, "global_avg_pool");
  const int b = x.dim(0), c = x.dim(3);
  const std::size_t hw = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  Tensor y({b, 1, 1, c});
  for (int n = 0; n < b; ++n) {
    for (std::size_t p = 0; p < hw; ++p) {
      const double* in = x.value().data() + (n * hw + p) * c;
      for (int j = 0; j < c; ++j) y[static_cast<std::size_t>(n) * c + j] += in[j];
    }
    for (int j = 0; j < c; ++j) y[static_cast<std::size_t>(n) * c + j] /= static_cast<double>(hw);
  }
  return make_result(std::move(y), {x}, [b, c, hw](Node& self) {
    double* g = self.inputs[0]->grad_ref().data();
    for (int n = 0; n < b; ++n)
      for (std::size_t p = 0; p < hw; ++p)
        for (int j = 0; j < c; ++j) g[(n * hw + p) * c + j] += self.grad[static_cast<std::size_t>(n) * c + j] / static_cast<double>(hw);
  });
}

Var channel_scale(const Var& x, const Var& gate) {
  require_rank4(x, "channel_scale");
  const int b = x.dim(0), c = x.dim(3);
  if (gate.shape() != Shape{b, 1, 1, c}) throw InvalidInput("channel_scale: gate must be (B, 1, 1, C)");
  const std::size_t hw = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  Tensor y = x.value();
  for (int n = 0; n < b; ++n)
    for (std::size_t p = 0; p < hw; ++p)
      for (int j = 0; j < c; ++j) y[(n * hw + p) * c + j] *= gate.value()[static_cast<std::size_t>(n) * c + j];
  return make_result(std::move(y), {x, gate}, [b, c, hw](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    const Tensor& gv = self.inputs[1]->value;
    if (wants(self, 0)) {
      double* g = self.inputs[0]->grad_ref().data();
      for (int n = 0; n < b; ++n)
        for (std::size_t p = 0; p < hw; ++p)
          for (int j = 0; j < c; ++j) g[(n * hw + p) * c + j] += self.grad[(n * hw + p) * c + j] * gv[static_cast<std::size_t>(n) * c + j];
    }
    if (wants(self, 1)) {
      double* g = self.inputs[1]->grad_ref().data();
      for (int n = 0; n < b; ++n)
        for (std::size_t p = 0; p < hw; ++p)
          for (int j = 0; j < c; ++j) g[static_cast<std::size_t>(n) * c + j] += self.grad[(n * hw + p) * c + j] * xv[(n * hw + p) * c + j];
    }
  });
}

namespace {

// Flat offsets mapping each element of the (B, H/f, W/f, f*f*C) layout to
// its source in (B, H, W, C).
std::shared_ptr<std::vector<std::size_t>> depth_map(int b, int h, int w, int c, int f) {
  const int ho = h / f, wo = w / f, co = c * f * f;
  auto map = std::make_shared<std::vector<std::size_t>>(static_cast<std::size_t>(b) * h * w * c);
  std::size_t k = 0;
  for (int n = 0; n < b; ++n)
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x)
        for (int ch = 0; ch < co; ++ch) {
          const int blockidx = ch / c;
          const int dy = blockidx / f, dx = blockidx % f;
          (*map)[k++] = ((static_cast<std::size_t>(n) * h + y * f + dy) * w + x * f + dx) * c + ch % c;
        }
  return map;
}

}  // namespace

Var space_to_depth(const Var& x, int factor) {
  require_rank4(x, "space_to_depth");
  const int b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  if (factor < 1 || h % factor || w % factor) throw InvalidInput("space_to_depth: dims not divisible by factor");
  auto map = depth_map(b, h, w, c, factor);
  Tensor y({b, h / factor, w / factor, c * factor * factor});
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = x.value()[(*map)[k]];
  return make_result(std::move(y), {x}, [map](Node& self) {
    double* g = self.inputs[0]->grad_ref().data();
    for (std::size_t k = 0; k < self.grad.size(); ++k) g[(*map)[k]] += self.grad[k];
  });
}

Var depth_to_space(const Var& x, int factor) {
  require_rank4(x, "depth_to_space");
  const int b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  if (factor < 1 || c % (factor * factor)) throw InvalidInput("depth_to_space: channels not divisible by factor^2");
  const int co = c / (factor * factor);
  auto map = depth_map(b, h * factor, w * factor, co, factor);
  Tensor y({b, h * factor, w * factor, co});
  for (std::size_t k = 0; k < x.value().size(); ++k) y[(*map)[k]] = x.value()[k];
  return make_result(std::move(y), {x}, [map](Node& self) {
    double* g = self.inputs[0]->grad_ref().data();
    for (std::size_t k = 0; k < map->size(); ++k) g[k] += self.grad[(*map)[k]];
  });
}

Var pad_hw(const Var& x, int height, int width) {
  require_rank4(x, "pad_hw");
  const int b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  if (height < h || width < w) throw InvalidInput("pad_hw: target smaller than input");
  if (height == h && width == w) return x;
  Tensor y({b, height, width, c});
  for (int n = 0; n < b; ++n)
    for (int yy = 0; yy < h; ++yy) {
      const double* src = x.value().data() + ((static_cast<std::size_t>(n) * h + yy) * w) * c;
      std::copy(src, src + static_cast<std::size_t>(w) * c, y.data() + ((static_cast<std::size_t>(n) * height + yy) * width) * c);
    }
  return make_result(std::move(y), {x}, [b, h, w, c, height, width](Node& self) {
    double* g = self.inputs[0]->grad_ref().data();
    for (int n = 0; n < b; ++n)
      for (int yy = 0; yy < h; ++yy) {
        const double* src = self.grad.data() + ((static_cast<std::size_t>(n) * height + yy) * width) * c;
        double* dst = g + ((static_cast<std::size_t>(n) * h + yy) * w) * c;
        for (std::size_t i = 0; i < static_cast<std::size_t>(w) * c; ++i) dst[i] += src[i];
      }
  });
}

Var crop_hw(const Var& x, int height, int width) {
  require_rank4(x, "crop_hw");
  const int b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  if (height > h || width > w || height < 1 || width < 1) throw InvalidInput("crop_hw: target larger than input");
  if (height == h && width == w) return x;
  Tensor y({b, height, width, c});
  for (int n = 0; n < b; ++n)
    for (int yy = 0; yy < height; ++yy) {
      const double* src = x.value().data() + ((static_cast<std::size_t>(n) * h + yy) * w) * c;
      std::copy(src, src + static_cast<std::size_t>(width) * c, y.data() + ((static_cast<std::size_t>(n) * height + yy) * width) * c);
    }
  return make_result(std::move(y), {x}, [b, h, w, c, height, width](Node& self) {
    double* g = self.inputs[0]->grad_ref().data();
    for (int n = 0; n < b; ++n)
      for (int yy = 0; yy < height; ++yy) {
        const double* src = self.grad.data() + ((static_cast<std::size_t>(n) * height + yy) * width) * c;
        double* dst = g + ((static_cast<std::size_t>(n) * h + yy) * w) * c;
        for (std::size_t i = 0; i < static_cast<std::size_t>(width) * c; ++i) dst[i] += src[i];
      }
  });
}

Var window_attention(const Var& qkv, const Var& bias_table, int heads, int window, int shift, int table_window) {
  require_rank4(qkv, "window_attention");
  kernels::WindowGeometry g;
  g.batch = qkv.dim(0);
  g.height = qkv.dim(1);
  g.width = qkv.dim(2);
  g.channels = qkv.dim(3) / 3;
  g.heads = heads;
  g.window = window;
  g.shift = shift;
  g.table_window = table_window;
  if (qkv.dim(3) % 3 || g.channels % heads) throw ConfigError("window_attention: channels not divisible by heads");
  if (g.height % window || g.width % window) throw InvalidInput("window_attention: grid not padded to window size");
  if (window > table_window) throw ConfigError("window_attention: window larger than bias table");
  if (bias_table.value().size() != static_cast<std::size_t>(g.table_rows()) * heads) {
    throw ConfigError("window_attention: bias table shape mismatch");
  }
  auto probs = std::make_shared<std::vector<double>>(g.probs_size());
  Tensor y({g.batch, g.height, g.width, g.channels});
  kernels::window_attention_forward(g, qkv.value().data(), bias_table.value().data(), y.data(), probs->data());
  return make_result(std::move(y), {qkv, bias_table}, [g, probs](Node& self) {
    double* gq = wants(self, 0) ? self.inputs[0]->grad_ref().data() : nullptr;
    double* gb = wants(self, 1) ? self.inputs[1]->grad_ref().data() : nullptr;
    kernels::window_attention_backward(g, self.inputs[0]->value.data(), probs->data(), self.grad.data(), gq, gb);
  });
}

namespace {

struct Taps {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

Taps bilinear_taps(int in, int out) {
  Taps t;
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(src);
    if (lo > in - 1) lo = in - 1;
    const int hi = std::min(lo + 1, in - 1);
    t.lo.push_back(lo);
    t.hi.push_back(hi);
    t.frac.push_back(src - lo);
  }
  return t;
}

}  // namespace

Var upsample_bilinear(const Var& x, int factor) {
  require_rank4(x, "upsample_bilinear");
  if (factor < 1) throw InvalidInput("upsample_bilinear: factor must be positive");
  if (factor == 1) return x;
  const int b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const int oh = h * factor, ow = w * factor;
  auto ty = std::make_shared<Taps>(bilinear_taps(h, oh));
  auto tx = std::make_shared<Taps>(bilinear_taps(w, ow));
  Tensor y({b, oh, ow, c});
  const double* xv = x.value().data();
  for (int n = 0; n < b; ++n)
    for (int yy = 0; yy < oh; ++yy) {
      const double fy = ty->frac[static_cast<std::size_t>(yy)];
      const std::size_t r0 = (static_cast<std::size_t>(n) * h + ty->lo[static_cast<std::size_t>(yy)]) * w;
      const std::size_t r1 = (static_cast<std::size_t>(n) * h + ty->hi[static_cast<std::size_t>(yy)]) * w;
      for (int xx = 0; xx < ow; ++xx) {
        const double fx = tx->frac[static_cast<std::size_t>(xx)];
        const std::size_t c0 = static_cast<std::size_t>(tx->lo[static_cast<std::size_t>(xx)]);
        const std::size_t c1 = static_cast<std::size_t>(tx->hi[static_cast<std::size_t>(xx)]);
        double* out = y.data() + ((static_cast<std::size_t>(n) * oh + yy) * ow + xx) * c;
        for (int j = 0; j < c; ++j) {
          out[j] = (1 - fy) * ((1 - fx) * xv[(r0 + c0) * c + j] + fx * xv[(r0 + c1) * c + j]) +
                   fy * ((1 - fx) * xv[(r1 + c0) * c + j] + fx * xv[(r1 + c1) * c + j]);
        }
      }
    }
  return make_result(std::move(y), {x}, [ty, tx, b, h, w, c, oh, ow](Node& self) {
    double* g = self.inputs[0]->grad_ref().data();
    for (int n = 0; n < b; ++n)
      for (int yy = 0; yy < oh; ++yy) {
        const double fy = ty->frac[static_cast<std::size_t>(yy)];
        const std::size_t r0 = (static_cast<std::size_t>(n) * h + ty->lo[static_cast<std::size_t>(yy)]) * w;
        const std::size_t r1 = (static_cast<std::size_t>(n) * h + ty->hi[static_cast<std::size_t>(yy)]) * w;
        for (int xx = 0; xx < ow; ++xx) {
          const double fx = tx->frac[static_cast<std::size_t>(xx)];
          const std::size_t c0 = static_cast<std::size_t>(tx->lo[static_cast<std::size_t>(xx)]);
          const std::size_t c1 = static_cast<std::size_t>(tx->hi[static_cast<std::size_t>(xx)]);
          const double* go = self.grad.data() + ((static_cast<std::size_t>(n) * oh + yy) * ow + xx) * c;
          for (int j = 0; j < c; ++j) {
            g[(r0 + c0) * c + j] += go[j] * (1 - fy) * (1 - fx);
            g[(r0 + c1) * c + j] += go[j] * (1 - fy) * fx;
            g[(r1 + c0) * c + j] += go[j] * fy * (1 - fx);
            g[(r1 + c1) * c + j] += go[j] * fy * fx;
          }
        }
      }
  });
}

}  // namespace ops
}  // namespace ftn
