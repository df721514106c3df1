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

#include "ftn/metrics.hpp"

#include <iomanip>
#include <map>
#include <sstream>

#include "ftn/errors.hpp"

namespace ftn {

ConfusionCounts& ConfusionCounts::merge(const ConfusionCounts& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  tn += other.tn;
  return *this;
}

LabelMask binarize(const ProbabilityMap& p, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidInput("binarize: threshold must lie in (0, 1)");
  LabelMask m(p.height, p.width);
  for (std::size_t i = 0; i < p.size(); ++i) m.values[i] = p.values[i] >= threshold ? 1 : 0;
  return m;
}

ConfusionCounts accumulate(const LabelMask& pred, const LabelMask& gt, ConfusionCounts c) {
  if (!pred.same_size(gt)) throw InvalidInput("accumulate: prediction and label sizes differ");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.values[i] != 0, g = gt.values[i] != 0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den, const char* name, std::vector<std::string>& undefined) {
  if (den == 0) {
    undefined.emplace_back(name);
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsRecord compute(const ConfusionCounts& c) {
  if (c.total() == 0) throw InvalidInput("compute: no pixels accumulated");
  MetricsRecord r;
  r.precision = ratio(c.tp, c.tp + c.fp, "precision", r.undefined);
  r.recall = ratio(c.tp, c.tp + c.fn, "recall", r.undefined);
  r.f1 = f1_score(r.precision, r.recall);
  if (r.precision + r.recall == 0.0) r.undefined.emplace_back("f1");
  r.iou = ratio(c.tp, c.tp + c.fp + c.fn, "iou", r.undefined);
  r.oa = ratio(c.tp + c.tn, c.total(), "oa", r.undefined);
  return r;
}

MetricsRecord compute_macro(std::span<const ConfusionCounts> per_tile) {
  if (per_tile.empty()) throw InvalidInput("compute_macro: no tiles");
  MetricsRecord mean;
  for (const auto& c : per_tile) {
    const MetricsRecord r = compute(c);
    mean.precision += r.precision;
    mean.recall += r.recall;
    mean.f1 += r.f1;
    mean.iou += r.iou;
    mean.oa += r.oa;
  }
  const double n = static_cast<double>(per_tile.size());
  mean.precision /= n;
  mean.recall /= n;
  mean.f1 /= n;
  mean.iou /= n;
  mean.oa /= n;
  return mean;
}

std::string MetricsRecord::to_text() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "precision=" << precision << "\nrecall=" << recall << "\nf1=" << f1 << "\niou=" << iou << "\noa=" << oa << '\n';
  return os.str();
}

MetricsRecord MetricsRecord::from_text(const std::string& text) {
  std::map<std::string, double> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidInput("metrics record: malformed line '" + line + "'");
    kv[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
  }
  MetricsRecord r;
  for (const char* key : {"precision", "recall", "f1", "iou", "oa"}) {
    if (!kv.count(key)) throw InvalidInput(std::string("metrics record: missing ") + key);
  }
  if (kv.size() != 5) throw InvalidInput("metrics record: unexpected keys");
  r.precision = kv["precision"];
  r.recall = kv["recall"];
  r.f1 = kv["f1"];
  r.iou = kv["iou"];
  r.oa = kv["oa"];
  return r;
}

}  // namespace ftn
