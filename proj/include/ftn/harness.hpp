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
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ftn/checkpoint.hpp"
#include "ftn/config.hpp"
#include "ftn/data.hpp"
#include "ftn/metrics.hpp"
#include "ftn/model.hpp"
#include "ftn/optimizer.hpp"

namespace ftn {

/// Pairs of a split as the model sees them: synthetic or loaded from
/// `dataset_root`, tiled, and resized to `input_size`.
std::vector<SamplePair> load_split(const TrainConfig& cfg, const std::string& split);

/// Micro-averaged metrics of eval-mode predictions binarized at 0.5.
MetricsRecord evaluate(const ChangeDetector& model, std::span<const SamplePair> samples, int batch_size);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_f1;
  std::optional<double> val_iou;
};

struct TrainResult {
  std::unique_ptr<ChangeDetector> model;
  std::vector<EpochRecord> log;
  int steps = 0;
  double first_step_loss = 0.0;
  std::optional<MetricsRecord> best_metrics;
  int best_epoch = -1;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
};

struct TrainOptions {
  /// Progress lines; null keeps training quiet.
  std::ostream* progress = nullptr;
  /// Skip all files (checkpoints and CSV log).
  bool write_files = true;
};

/// Throws TrainingError naming the offending loss term when the loss
/// stops being finite.
TrainResult train(const TrainConfig& cfg, const TrainOptions& options = {});

/// Model weights, optimizer state and run metadata.
Checkpoint make_checkpoint(const ChangeDetector& model, const TrainConfig& cfg, int epoch, int step,
                           const Sgd* optimizer = nullptr);

struct LoadedModel {
  std::unique_ptr<ChangeDetector> model;
  TrainConfig config;
  int epoch = 0;
};
LoadedModel load_model(const std::filesystem::path& ckpt_path);

/// Loads the checkpoint and evaluates it on `split` of its own config.
MetricsRecord evaluate(const std::filesystem::path& ckpt_path, const std::string& split);

struct PredictionFiles {
  std::filesystem::path probability;  // 16-bit grayscale
  std::filesystem::path mask;         // 8-bit, 0/255
  std::filesystem::path overlay;      // image B with the change contour in red
};

/// 16-bit code of a probability; codes >= 32768 are exactly p >= 0.5.
std::uint16_t quantize_probability(double p);

PredictionFiles predict(const ChangeDetector& model, const std::filesystem::path& image_a,
                        const std::filesystem::path& image_b, const std::filesystem::path& out_dir);
PredictionFiles predict(const std::filesystem::path& ckpt_path, const std::filesystem::path& image_a,
                        const std::filesystem::path& image_b, const std::filesystem::path& out_dir);

struct ImportReport {
  std::vector<std::string> loaded;
  /// Trainable parameters left at their random initialization.
  std::vector<std::string> initialized;
  /// Container tensors that match nothing in the backbone.
  std::vector<std::string> ignored;
};

/// Loads backbone tensors whose names match and flags them pretrained.
/// A matched name with a different shape throws ConfigError naming it.
ImportReport import_pretrained(ParameterStore& store, const Checkpoint& source,
                               const std::string& prefix = "backbone.");
std::unique_ptr<ChangeDetector> import_pretrained(const std::filesystem::path& path, const TrainConfig& cfg,
                                                  ImportReport* report = nullptr);

}  // namespace ftn
