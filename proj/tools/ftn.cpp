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

// Command-line front end: train, eval, predict, synth, import-weights.

#include <CLI11.hpp>

#include <iostream>

#include "ftn/errors.hpp"
#include "ftn/harness.hpp"

namespace {

ftn::TrainConfig resolve_config(const std::string& path, const std::string& profile) {
  ftn::TrainConfig base = ftn::TrainConfig::profile(profile);
  return path.empty() ? base : ftn::load_config_file(path, base);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transformer change detection for bi-temporal image pairs"};
  app.require_subcommand(1);

  std::string config_path, profile = "desk";
  auto* train_cmd = app.add_subcommand("train", "Train a model from a key=value config");
  train_cmd->add_option("--config", config_path, "Config file; keys override the profile");
  train_cmd->add_option("--profile", profile, "Base profile")->check(CLI::IsMember({"desk", "full"}));

  std::string ckpt, split = "val";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split of its dataset");
  eval_cmd->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--split", split, "Split name");

  std::string image_a, image_b, out_dir;
  auto* predict_cmd = app.add_subcommand("predict", "Write probability, mask and overlay PNGs for one pair");
  predict_cmd->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  predict_cmd->add_option("--a", image_a, "Earlier image")->required();
  predict_cmd->add_option("--b", image_b, "Later image")->required();
  predict_cmd->add_option("--out", out_dir, "Output directory")->required();

  std::uint64_t seed = 0;
  int count = 8, size = 64;
  std::string split_name = "train";
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic change dataset");
  synth_cmd->add_option("--seed", seed, "Generator seed");
  synth_cmd->add_option("--count", count, "Number of pairs")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--size", size, "Side length in pixels")->check(CLI::Range(32, 1 << 14));
  synth_cmd->add_option("--out", out_dir, "Dataset root")->required();
  synth_cmd->add_option("--split", split_name, "Split directory to write");

  std::string src, import_out;
  auto* import_cmd = app.add_subcommand("import-weights", "Check a pretrained container against the model");
  import_cmd->add_option("--src", src, "Pretrained container")->required();
  import_cmd->add_option("--config", config_path, "Config file describing the model");
  import_cmd->add_option("--profile", profile, "Base profile")->check(CLI::IsMember({"desk", "full"}));
  import_cmd->add_option("--out", import_out, "Write the initialized model as a checkpoint");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      const ftn::TrainConfig cfg = resolve_config(config_path, profile);
      const auto result = ftn::train(cfg, {&std::cout, true});
      std::cout << "steps " << result.steps << ", best epoch " << result.best_epoch << "\n";
      if (result.best_metrics) std::cout << result.best_metrics->to_text();
      std::cout << "best " << result.best_checkpoint.string() << "\nlast " << result.last_checkpoint.string() << "\n";
    } else if (*eval_cmd) {
      std::cout << ftn::evaluate(ckpt, split).to_text();
    } else if (*predict_cmd) {
      const auto files = ftn::predict(ckpt, image_a, image_b, out_dir);
      std::cout << files.probability.string() << "\n" << files.mask.string() << "\n" << files.overlay.string() << "\n";
    } else if (*synth_cmd) {
      const auto pairs = ftn::synth_generate(seed, count, size);
      ftn::write_dataset(out_dir, split_name, pairs);
      std::cout << "wrote " << pairs.size() << " pairs to " << (std::filesystem::path(out_dir) / split_name).string()
                << "\n";
    } else if (*import_cmd) {
      const ftn::TrainConfig cfg = resolve_config(config_path, profile);
      ftn::ImportReport report;
      auto model = ftn::import_pretrained(src, cfg, &report);
      for (const auto& n : report.loaded) std::cout << "loaded " << n << "\n";
      for (const auto& n : report.initialized) std::cout << "initialized " << n << "\n";
      for (const auto& n : report.ignored) std::cout << "ignored " << n << "\n";
      std::cout << report.loaded.size() << " loaded, " << report.initialized.size() << " initialized, "
                << report.ignored.size() << " ignored\n";
      if (!import_out.empty()) ftn::save_checkpoint(import_out, ftn::make_checkpoint(*model, cfg, 0, 0));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
