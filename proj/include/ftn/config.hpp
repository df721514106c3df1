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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ftn/losses.hpp"
#include "ftn/model.hpp"

namespace ftn {

/// Everything a training run depends on. Serialized as flat key=value
/// text whose keys are exactly the field names below.
struct TrainConfig {
  // optimizer and schedule
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 6;
  int epochs = 100;
  double lr_decay_factor = 0.1;
  int lr_decay_every = 20;
  double new_layer_lr_multiplier = 10.0;
  /// Stop after this many SGD steps; 0 runs every epoch.
  int max_steps = 0;
  /// Validate every this many epochs (and after the last one).
  int val_every = 1;

  // data
  std::string dataset_root;  // empty: synthetic pairs
  std::string train_split = "train";
  std::string val_split = "val";
  int input_size = 384;
  int tile_size = 256;  // 0 keeps images whole
  bool augment = true;
  int synth_count = 8;
  /// 0 validates on the training pairs.
  int synth_val_count = 0;
  std::uint64_t synth_seed = 1;

  // model
  int patch_size = 4;
  int embed_dim = 128;
  std::array<int, 4> stage_depths{2, 2, 18, 2};
  std::array<int, 4> stage_heads{4, 8, 16, 32};
  int window_size = 12;
  int extra_stage_depth = 1;
  int reduce_to = 128;
  double mlp_ratio = 4.0;
  bool use_dfe = true;
  bool use_pam = true;
  std::string decoder = "pcp";
  std::array<int, 4> decoder_depths{4, 4, 4, 4};
  int decoder_heads = 4;
  int decoder_window = 12;
  std::string pretrained;

  // loss
  bool use_bce = true;
  bool weighted_bce = true;
  bool use_ssim = true;
  bool use_siou = true;
  std::array<double, kPyramidLevels> side_weights{1.0, 1.0, 1.0, 1.0, 1.0};
  double boundary_weight = 2.0;
  int ssim_window = 11;
  std::string weight_reference = "label";

  std::uint64_t seed = 0;
  std::string out_dir = "runs/ftn";

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;
  ModelConfig model_config() const;
  LossConfig loss_config(std::array<double, 2> class_frequencies) const;

  std::map<std::string, std::string> to_map() const;
  std::string to_text() const;
  /// Applies key=value pairs on top of `base`; unknown keys throw.
  static TrainConfig from_map(const std::map<std::string, std::string>& values, TrainConfig base);
  static TrainConfig from_text(const std::string& text, TrainConfig base);

  /// Full-scale protocol: 384 px inputs, 100 epochs, batch 6.
  static TrainConfig full();
  /// 64 px synthetic pairs, tiny encoder, 500 steps.
  static TrainConfig desk();
  static TrainConfig profile(const std::string& name);

  static std::vector<std::string> keys();
};

TrainConfig load_config_file(const std::filesystem::path& path, const TrainConfig& base);

/// Base learning rate at `epoch`; parameters outside the pretrained set
/// additionally use new_layer_lr_multiplier.
double lr_schedule(int epoch, const TrainConfig& cfg);

}  // namespace ftn
