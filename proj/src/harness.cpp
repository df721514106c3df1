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

#include "ftn/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

#include "ftn/errors.hpp"
#include "ftn/losses.hpp"
#include "ftn/png_io.hpp"

namespace fs = std::filesystem;

namespace ftn {

std::vector<SamplePair> load_split(const TrainConfig& cfg, const std::string& split) {
  if (cfg.dataset_root.empty()) {
    if (split == cfg.train_split || cfg.synth_val_count == 0) {
      return synth_generate(cfg.synth_seed, cfg.synth_count, cfg.input_size);
    }
    return synth_generate(derive_seed(cfg.synth_seed, split), cfg.synth_val_count, cfg.input_size);
  }
  DatasetManifest manifest = load_manifest(cfg.dataset_root, split);
  manifest.tile_size = cfg.tile_size;
  manifest.seed = cfg.seed;
  std::vector<SamplePair> samples = load_samples(manifest);
  for (auto& s : samples) {
    if (s.height() != cfg.input_size || s.width() != cfg.input_size) s = resize(s, cfg.input_size);
  }
  return samples;
}

MetricsRecord evaluate(const ChangeDetector& model, std::span<const SamplePair> samples, int batch_size) {
  if (samples.empty()) throw InvalidInput("evaluate: split is empty");
  const auto probs = model.predict(samples, batch_size);
  ConfusionCounts counts;
  for (std::size_t i = 0; i < samples.size(); ++i) counts = accumulate(binarize(probs[i]), samples[i].mask, counts);
  return compute(counts);
}

namespace {

std::string describe_non_finite(const LossReport& report) {
  for (std::size_t k = 0; k < report.terms.size(); ++k) {
    const auto& t = report.terms[k];
    const std::string where = k == 0 ? "fused output" : "side output " + std::to_string(k);
    if (!std::isfinite(t.wbce)) return "wbce term of the " + where;
    if (!std::isfinite(t.ssim)) return "ssim term of the " + where;
    if (!std::isfinite(t.siou)) return "siou term of the " + where;
  }
  return "total (individual terms finite)";
}

void check_gradients(const ParameterStore& store) {
  for (const auto& p : store.parameters()) {
    if (p.var.has_grad() && !p.var.grad().all_finite()) {
      throw TrainingError("non-finite gradient in parameter " + p.name);
    }
  }
}

std::string format_optional(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace

Checkpoint make_checkpoint(const ChangeDetector& model, const TrainConfig& cfg, int epoch, int step,
                           const Sgd* optimizer) {
  Checkpoint ckpt;
  ckpt.metadata["format"] = "ftn-checkpoint";
  ckpt.metadata["epoch"] = std::to_string(epoch);
  ckpt.metadata["step"] = std::to_string(step);
  // Every random stream is derived from these seeds and the epoch, so they
  // are the complete RNG state.
  ckpt.metadata["rng.seed"] = std::to_string(cfg.seed);
  ckpt.metadata["rng.synth_seed"] = std::to_string(cfg.synth_seed);
  for (const auto& [k, v] : cfg.to_map()) ckpt.metadata["config." + k] = v;
  ckpt.tensors = snapshot_parameters(model.store());
  if (optimizer) optimizer->save_state(ckpt);
  return ckpt;
}

LoadedModel load_model(const fs::path& ckpt_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  std::map<std::string, std::string> values;
  for (const auto& [k, v] : ckpt.metadata) {
    if (k.rfind("config.", 0) == 0) values[k.substr(7)] = v;
  }
  if (values.empty()) throw IngestionError(ckpt_path.string() + " carries no training config");
  LoadedModel out;
  out.config = TrainConfig::from_map(values, TrainConfig{});
  out.model = std::make_unique<ChangeDetector>(out.config.model_config(), out.config.seed);
  restore_parameters(out.model->store(), ckpt, true);
  if (auto it = ckpt.metadata.find("epoch"); it != ckpt.metadata.end()) out.epoch = std::stoi(it->second);
  return out;
}

MetricsRecord evaluate(const fs::path& ckpt_path, const std::string& split) {
  const LoadedModel loaded = load_model(ckpt_path);
  const auto samples = load_split(loaded.config, split);
  return evaluate(*loaded.model, samples, loaded.config.batch_size);
}

TrainResult train(const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  const auto train_set = load_split(cfg, cfg.train_split);
  if (train_set.size() < 2) throw IngestionError("training split needs at least two pairs for batch statistics");
  const auto val_set = load_split(cfg, cfg.val_split);

  std::vector<LabelMask> all_masks;
  for (const auto& s : train_set) all_masks.push_back(s.mask);
  const LossConfig loss_cfg = cfg.loss_config(floor_frequencies(class_frequencies(all_masks)));

  TrainResult result;
  result.model = std::make_unique<ChangeDetector>(cfg.model_config(), cfg.seed);
  ChangeDetector& model = *result.model;
  if (!cfg.pretrained.empty()) import_pretrained(model.store(), load_checkpoint(cfg.pretrained));
  Sgd sgd(model.store(), cfg.momentum, cfg.weight_decay, cfg.new_layer_lr_multiplier);

  const fs::path out_dir = cfg.out_dir;
  std::ofstream csv;
  if (options.write_files) {
    fs::create_directories(out_dir);
    csv.open(out_dir / "train_log.csv", std::ios::trunc);
    if (!csv) throw IngestionError("cannot write " + (out_dir / "train_log.csv").string());
    csv << "epoch,lr,train_loss,val_f1,val_iou\n";
    std::ofstream(out_dir / "config.txt", std::ios::trunc) << cfg.to_text();
  }

  const auto started = std::chrono::steady_clock::now();
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  double best_f1 = -1.0;
  bool stop = false;
  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    const auto order = shuffled_indices(train_set.size(), derive_seed(cfg.seed, "epoch/" + std::to_string(epoch)));
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      if (end - begin < 2) break;  // batch norm needs two samples
      std::vector<SamplePair> augmented;
      std::vector<const SamplePair*> members;
      std::vector<LabelMask> masks;
      if (cfg.augment) {
        for (std::size_t i = begin; i < end; ++i) {
          const SamplePair& s = train_set[order[i]];
          augmented.push_back(augment(s, derive_seed(cfg.seed, s.id + "/" + std::to_string(epoch))));
        }
        for (const auto& s : augmented) members.push_back(&s);
      } else {
        for (std::size_t i = begin; i < end; ++i) members.push_back(&train_set[order[i]]);
      }
      for (const auto* s : members) masks.push_back(s->mask);

      const PredictionSet preds = model.forward(Var(image_batch(members, false)), Var(image_batch(members, true)), true);
      const LossReport report = total_loss(preds, masks, loss_cfg);
      const double loss = report.total.value()[0];
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", step " +
                            std::to_string(result.steps + 1) + ": " + describe_non_finite(report));
      }
      model.store().zero_grad();
      backward(report.total);
      check_gradients(model.store());
      sgd.step(lr);
      if (result.steps == 0) result.first_step_loss = loss;
      ++result.steps;
      loss_sum += loss;
      ++batches;
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) {
        stop = true;
        break;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    rec.train_loss = batches ? loss_sum / batches : 0.0;
    const bool last = stop || epoch + 1 == cfg.epochs;
    if ((epoch + 1) % cfg.val_every == 0 || last) {
      const MetricsRecord m = evaluate(model, val_set, cfg.batch_size);
      rec.val_f1 = m.f1;
      rec.val_iou = m.iou;
      // Ties keep the earlier epoch.
      if (m.f1 > best_f1) {
        best_f1 = m.f1;
        result.best_metrics = m;
        result.best_epoch = rec.epoch;
        if (options.write_files) {
          result.best_checkpoint = out_dir / "best.ckpt";
          save_checkpoint(result.best_checkpoint, make_checkpoint(model, cfg, rec.epoch, result.steps, &sgd));
        }
      }
    }
    result.log.push_back(rec);
    if (options.write_files) {
      csv << rec.epoch << ',' << lr << ',' << format_optional(rec.train_loss) << ',' << format_optional(rec.val_f1) << ','
          << format_optional(rec.val_iou) << '\n';
      csv.flush();
    }
    if (options.progress && (rec.val_f1 || epoch == 0)) {
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      *options.progress << "epoch " << rec.epoch << " step " << result.steps << " lr " << lr << " loss "
                        << rec.train_loss;
      if (rec.val_f1) *options.progress << " val_f1 " << *rec.val_f1 << " val_iou " << *rec.val_iou;
      *options.progress << " (" << elapsed << " s)\n";
    }
  }
  if (options.write_files) {
    result.last_checkpoint = out_dir / "last.ckpt";
    const int epoch = result.log.empty() ? 0 : result.log.back().epoch;
    save_checkpoint(result.last_checkpoint, make_checkpoint(model, cfg, epoch, result.steps, &sgd));
  }
  return result;
}

std::uint16_t quantize_probability(double p) {
  const double clamped = std::clamp(p, 0.0, 1.0);
  long q = std::lround(clamped * 65535.0);
  // Keep the code on the same side of 32768 as p is of 0.5.
  if (clamped < 0.5) q = std::min(q, 32767L);
  else q = std::max(q, 32768L);
  return static_cast<std::uint16_t>(q);
}

PredictionFiles predict(const ChangeDetector& model, const fs::path& image_a, const fs::path& image_b,
                        const fs::path& out_dir) {
  SamplePair pair;
  pair.id = image_a.stem().string();
  pair.image_a = load_rgb(image_a);
  pair.image_b = load_rgb(image_b);
  if (pair.image_a.height != pair.image_b.height || pair.image_a.width != pair.image_b.width) {
    throw InvalidInput("predict: " + image_a.string() + " and " + image_b.string() + " differ in size");
  }
  pair.mask = LabelMask(pair.image_a.height, pair.image_a.width);
  const ProbabilityMap prob = model.predict(std::span<const SamplePair>(&pair, 1), 1).front();
  const LabelMask mask = binarize(prob);
  const int h = prob.height, w = prob.width;

  PngImage prob_png{w, h, 1, 16, std::vector<std::uint16_t>(prob.size())};
  PngImage mask_png{w, h, 1, 8, std::vector<std::uint16_t>(prob.size())};
  for (std::size_t i = 0; i < prob.size(); ++i) {
    prob_png.samples[i] = quantize_probability(prob.values[i]);
    mask_png.samples[i] = mask.values[i] ? 255 : 0;
  }
  RgbImage overlay = pair.image_b;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(y, x)) continue;
      const bool edge = (y > 0 && !mask.at(y - 1, x)) || (y + 1 < h && !mask.at(y + 1, x)) ||
                        (x > 0 && !mask.at(y, x - 1)) || (x + 1 < w && !mask.at(y, x + 1));
      if (!edge) continue;
      overlay.at(y, x, 0) = 1.0;
      overlay.at(y, x, 1) = 0.0;
      overlay.at(y, x, 2) = 0.0;
    }
  }
  PredictionFiles files{out_dir / "probability.png", out_dir / "mask.png", out_dir / "overlay.png"};
  write_png(files.probability, prob_png);
  write_png(files.mask, mask_png);
  save_rgb(files.overlay, overlay);
  return files;
}

PredictionFiles predict(const fs::path& ckpt_path, const fs::path& image_a, const fs::path& image_b,
                        const fs::path& out_dir) {
  const LoadedModel loaded = load_model(ckpt_path);
  return predict(*loaded.model, image_a, image_b, out_dir);
}

ImportReport import_pretrained(ParameterStore& store, const Checkpoint& source, const std::string& prefix) {
  ImportReport report;
  std::string conflicts;
  for (const auto& p : store.parameters()) {
    if (p.name.rfind(prefix, 0) != 0) continue;
    const Tensor* t = source.find(p.name);
    if (t && t->shape() != p.var.shape()) {
      conflicts += "\n  " + p.name + ": container " + shape_string(t->shape()) + ", model " + shape_string(p.var.shape());
    }
  }
  if (!conflicts.empty()) throw ConfigError("pretrained container shape conflicts:" + conflicts);

  for (auto& p : store.parameters()) {
    const Tensor* t = p.name.rfind(prefix, 0) == 0 ? source.find(p.name) : nullptr;
    if (t) {
      p.var.value_mut() = *t;
      p.pretrained = true;
      report.loaded.push_back(p.name);
    } else {
      p.pretrained = false;
      if (p.trainable) report.initialized.push_back(p.name);
    }
  }
  for (const auto& t : source.tensors) {
    const Parameter* p = t.name.rfind(prefix, 0) == 0 ? store.find(t.name) : nullptr;
    if (!p) report.ignored.push_back(t.name);
  }
  return report;
}

std::unique_ptr<ChangeDetector> import_pretrained(const fs::path& path, const TrainConfig& cfg, ImportReport* report) {
  auto model = std::make_unique<ChangeDetector>(cfg.model_config(), cfg.seed);
  ImportReport r = import_pretrained(model->store(), load_checkpoint(path));
  if (report) *report = std::move(r);
  return model;
}

}  // namespace ftn
