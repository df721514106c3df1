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

#include "ftn/losses.hpp"

#include <algorithm>
#include <cmath>

#include "ftn/errors.hpp"
#include "ftn/kernels.hpp"

namespace ftn {

void LossConfig::validate() const {
  const double fsum = class_frequencies[0] + class_frequencies[1];
  if (class_frequencies[0] <= 0.0 || class_frequencies[1] <= 0.0 || std::abs(fsum - 1.0) > 1e-9) {
    throw ConfigError("loss config: class frequencies must be positive and sum to 1");
  }
  if (boundary_weight < 0.0) throw ConfigError("loss config: boundary weight must be >= 0");
  if (ssim_window < 3 || ssim_window % 2 == 0) throw ConfigError("loss config: SSIM window must be odd and >= 3");
  if (ssim_epsilon <= 0.0) throw ConfigError("loss config: SSIM epsilon must be > 0");
  for (double a : side_weights) {
    if (a < 0.0) throw ConfigError("loss config: side weights must be >= 0");
  }
  if (!use_bce && !use_ssim && !use_siou) throw ConfigError("loss config: at least one loss term is required");
}

std::array<double, 2> class_frequencies(std::span<const LabelMask> masks) {
  if (masks.empty()) throw InvalidInput("class_frequencies: no masks");
  std::size_t total = 0, changed = 0;
  for (const LabelMask& m : masks) {
    total += m.size();
    for (auto v : m.values) changed += v ? 1 : 0;
  }
  if (total == 0) throw InvalidInput("class_frequencies: masks are empty");
  const double f1 = static_cast<double>(changed) / static_cast<double>(total);
  return {1.0 - f1, f1};
}

std::array<double, 2> floor_frequencies(std::array<double, 2> f, double floor) {
  f[0] = std::max(f[0], floor);
  f[1] = std::max(f[1], floor);
  const double s = f[0] + f[1];
  return {f[0] / s, f[1] / s};
}

Plane<std::uint8_t> boundary_pixels(const LabelMask& reference) {
  Plane<std::uint8_t> edge(reference.height, reference.width, 0);
  for (int y = 0; y < reference.height; ++y) {
    for (int x = 0; x < reference.width; ++x) {
      const auto v = reference.at(y, x);
      const bool diff = (y > 0 && reference.at(y - 1, x) != v) || (y + 1 < reference.height && reference.at(y + 1, x) != v) ||
                        (x > 0 && reference.at(y, x - 1) != v) || (x + 1 < reference.width && reference.at(y, x + 1) != v);
      edge.at(y, x) = diff ? 1 : 0;
    }
  }
  return edge;
}

WeightMap wbce_weights(const LabelMask& reference, const LossConfig& cfg) {
  const auto& f = cfg.class_frequencies;
  // median of two values is their mean
  const double median = 0.5 * (f[0] + f[1]);
  const Plane<std::uint8_t> edge = boundary_pixels(reference);
  WeightMap w(reference.height, reference.width);
  for (std::size_t i = 0; i < w.size(); ++i) {
    w.values[i] = median / f[reference.values[i] ? 1 : 0] + cfg.boundary_weight * edge.values[i];
  }
  return w;
}

namespace {

void require_same(const ProbabilityMap& p, const LabelMask& g, const char* op) {
  if (!p.same_size(g) || p.size() == 0) {
    throw InvalidInput(std::string(op) + ": prediction " + std::to_string(p.height) + "x" + std::to_string(p.width) +
                       " vs label " + std::to_string(g.height) + "x" + std::to_string(g.width));
  }
}

}  // namespace

LossEval wbce_loss_grad(const ProbabilityMap& p, const LabelMask& g, const WeightMap& w) {
  require_same(p, g, "wbce_loss");
  if (!w.same_size(g)) throw InvalidInput("wbce_loss: weight map size mismatch");
  const double inv_n = 1.0 / static_cast<double>(p.size());
  LossEval out{0.0, Plane<double>(p.height, p.width)};
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pv = p.values[i];
    const double pc = std::clamp(pv, kLogClamp, 1.0 - kLogClamp);
    const bool inside = pv > kLogClamp && pv < 1.0 - kLogClamp;
    if (g.values[i]) {
      out.value -= w.values[i] * std::log(pc);
      if (inside) out.grad.values[i] = -w.values[i] / pc * inv_n;
    } else {
      out.value -= w.values[i] * std::log(1.0 - pc);
      if (inside) out.grad.values[i] = w.values[i] / (1.0 - pc) * inv_n;
    }
  }
  out.value *= inv_n;
  return out;
}

double wbce_loss(const ProbabilityMap& p, const LabelMask& g, const WeightMap& w) { return wbce_loss_grad(p, g, w).value; }

LossEval ssim_loss_grad(const ProbabilityMap& p, const LabelMask& g, const LossConfig& cfg) {
  require_same(p, g, "ssim_loss");
  const int n = cfg.ssim_window;
  if (p.height < n || p.width < n) {
    throw InvalidInput("ssim_loss: " + std::to_string(p.height) + "x" + std::to_string(p.width) +
                       " map is smaller than the " + std::to_string(n) + "x" + std::to_string(n) + " window");
  }
  const int h = p.height, w = p.width, r = n / 2;
  const std::size_t m = p.size();
  const double area = static_cast<double>(n) * n;
  const double eps = cfg.ssim_epsilon;

  // Planes: x, y, x^2, y^2, x*y -> local means.
  std::vector<double> src(5 * m), mean(5 * m);
  for (std::size_t i = 0; i < m; ++i) {
    const double x = p.values[i];
    const double y = g.values[i] ? 1.0 : 0.0;
    src[i] = x;
    src[m + i] = y;
    src[2 * m + i] = x * x;
    src[3 * m + i] = y * y;
    src[4 * m + i] = x * y;
  }
  kernels::box_sum_reflect(src.data(), mean.data(), 5, h, w, r);
  for (double& v : mean) v /= area;

  LossEval out{0.0, Plane<double>(h, w)};
  // Per-pixel sensitivities to mu_x, E[x^2], E[xy].
  std::vector<double> sens(3 * m), back(3 * m, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double mx = mean[i], my = mean[m + i];
    const double vx = mean[2 * m + i] - mx * mx;
    const double vy = mean[3 * m + i] - my * my;
    const double cxy = mean[4 * m + i] - mx * my;
    const double a = 2.0 * mx * my + eps;
    const double b = 2.0 * cxy + eps;
    const double c = mx * mx + my * my + eps;
    const double d = vx + vy + eps;
    const double s = a * b / (c * d);
    total += s;
    const double ds_da = b / (c * d), ds_db = a / (c * d), ds_dc = -s / c, ds_dd = -s / d;
    const double dmx = ds_da * 2.0 * my - ds_db * 2.0 * my + ds_dc * 2.0 * mx - ds_dd * 2.0 * mx;
    const double dexx = ds_dd;
    const double dexy = ds_db * 2.0;
    const double scale = -1.0 / static_cast<double>(m) / area;
    sens[i] = dmx * scale;
    sens[m + i] = dexx * scale;
    sens[2 * m + i] = dexy * scale;
  }
  out.value = 1.0 - total / static_cast<double>(m);
  kernels::box_sum_reflect_adjoint(sens.data(), back.data(), 3, h, w, r);
  for (std::size_t i = 0; i < m; ++i) {
    const double x = p.values[i];
    const double y = g.values[i] ? 1.0 : 0.0;
    out.grad.values[i] = back[i] + 2.0 * x * back[m + i] + y * back[2 * m + i];
  }
  return out;
}

double ssim_loss(const ProbabilityMap& p, const LabelMask& g, const LossConfig& cfg) { return ssim_loss_grad(p, g, cfg).value; }

LossEval siou_loss_grad(const ProbabilityMap& p, const LabelMask& g) {
  require_same(p, g, "siou_loss");
  double inter = 0.0, uni = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gv = g.values[i] ? 1.0 : 0.0;
    inter += p.values[i] * gv;
    uni += p.values[i] + gv - p.values[i] * gv;
  }
  LossEval out{0.0, Plane<double>(p.height, p.width)};
  // An empty prediction of an empty label is a perfect match.
  if (inter == 0.0 && uni == 0.0) return out;
  const double den = uni + kIouEpsilon;
  out.value = 1.0 - inter / den;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gv = g.values[i] ? 1.0 : 0.0;
    out.grad.values[i] = -(gv * den - inter * (1.0 - gv)) / (den * den);
  }
  return out;
}

double siou_loss(const ProbabilityMap& p, const LabelMask& g) { return siou_loss_grad(p, g).value; }

namespace {

LabelMask binarize_half(const ProbabilityMap& p) {
  LabelMask m(p.height, p.width);
  for (std::size_t i = 0; i < p.size(); ++i) m.values[i] = p.values[i] >= 0.5 ? 1 : 0;
  return m;
}

}  // namespace

LossEval combined_loss_grad(const ProbabilityMap& p, const LabelMask& g, const LossConfig& cfg, TermBreakdown* terms) {
  cfg.validate();
  require_same(p, g, "combined_loss");
  LossEval out{0.0, Plane<double>(p.height, p.width)};
  TermBreakdown parts;
  auto add = [&out](const LossEval& e) {
    out.value += e.value;
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad.values[i] += e.grad.values[i];
  };
  if (cfg.use_bce) {
    WeightMap w(p.height, p.width, 1.0);
    if (cfg.weighted_bce) {
      w = cfg.weight_reference == WeightReference::label ? wbce_weights(g, cfg) : wbce_weights(binarize_half(p), cfg);
    }
    LossEval e = wbce_loss_grad(p, g, w);
    parts.wbce = e.value;
    add(e);
  }
  if (cfg.use_ssim) {
    LossEval e = ssim_loss_grad(p, g, cfg);
    parts.ssim = e.value;
    add(e);
  }
  if (cfg.use_siou) {
    LossEval e = siou_loss_grad(p, g);
    parts.siou = e.value;
    add(e);
  }
  if (terms) *terms = parts;
  return out;
}

double combined_loss(const ProbabilityMap& p, const LabelMask& g, const LossConfig& cfg) {
  return combined_loss_grad(p, g, cfg).value;
}

double total_loss(const ProbabilityMap& fused, std::span<const ProbabilityMap> sides, const LabelMask& g,
                  const LossConfig& cfg) {
  if (sides.size() != kPyramidLevels) {
    throw InvalidInput("total_loss: expected " + std::to_string(kPyramidLevels) + " side outputs, got " +
                       std::to_string(sides.size()));
  }
  double total = combined_loss(fused, g, cfg);
  for (std::size_t s = 0; s < sides.size(); ++s) total += cfg.side_weights[s] * combined_loss(sides[s], g, cfg);
  return total;
}

Var combined_loss(const Var& probs, std::span<const LabelMask> masks, const LossConfig& cfg, TermBreakdown* terms) {
  const Shape& s = probs.shape();
  if (s.size() != 4 || s[3] != 1) throw InvalidInput("combined_loss: expected (B, H, W, 1) probabilities");
  const int batch = s[0], h = s[1], w = s[2];
  if (masks.size() != static_cast<std::size_t>(batch)) throw InvalidInput("combined_loss: one mask per sample required");
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  auto grad = std::make_shared<Tensor>(probs.shape());
  std::vector<double> values(static_cast<std::size_t>(batch));
  std::vector<TermBreakdown> parts(static_cast<std::size_t>(batch));
  std::vector<std::string> errors(static_cast<std::size_t>(batch));
#pragma omp parallel for schedule(static)
  for (int b = 0; b < batch; ++b) {
    try {
      ProbabilityMap p(h, w, std::vector<double>(probs.value().data() + b * plane, probs.value().data() + (b + 1) * plane));
      LossEval e = combined_loss_grad(p, masks[static_cast<std::size_t>(b)], cfg, &parts[static_cast<std::size_t>(b)]);
      values[static_cast<std::size_t>(b)] = e.value;
      for (std::size_t i = 0; i < plane; ++i) (*grad)[b * plane + i] = e.grad.values[i] / batch;
    } catch (const std::exception& ex) {
      errors[static_cast<std::size_t>(b)] = ex.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw InvalidInput(e);
  }
  double mean = 0.0;
  TermBreakdown avg;
  for (int b = 0; b < batch; ++b) {
    mean += values[static_cast<std::size_t>(b)] / batch;
    avg.wbce += parts[static_cast<std::size_t>(b)].wbce / batch;
    avg.ssim += parts[static_cast<std::size_t>(b)].ssim / batch;
    avg.siou += parts[static_cast<std::size_t>(b)].siou / batch;
  }
  if (terms) *terms = avg;
  return make_result(Tensor({1}, mean), {probs}, [grad](Node& self) {
    Tensor& g = self.inputs[0]->grad_ref();
    const double up = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * (*grad)[i];
  });
}

LossReport total_loss(const PredictionSet& preds, std::span<const LabelMask> masks, const LossConfig& cfg) {
  cfg.validate();
  if (!preds.fused_logits.defined()) throw InvalidInput("total_loss: missing fused output");
  for (const Var& s : preds.side_logits) {
    if (!s.defined()) throw InvalidInput("total_loss: missing side outputs");
  }
  LossReport report;
  std::vector<Var> terms{combined_loss(ops::sigmoid(preds.fused_logits), masks, cfg, &report.terms[0])};
  std::vector<double> weights{1.0};
  for (int k = 0; k < kPyramidLevels; ++k) {
    terms.push_back(combined_loss(ops::sigmoid(preds.side_logits[static_cast<std::size_t>(k)]), masks, cfg,
                                  &report.terms[static_cast<std::size_t>(k + 1)]));
    weights.push_back(cfg.side_weights[static_cast<std::size_t>(k)]);
  }
  report.total = ops::weighted_sum(terms, weights);
  return report;
}

}  // namespace ftn
