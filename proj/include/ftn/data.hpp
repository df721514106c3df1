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
#include <string>
#include <vector>

#include "ftn/plane.hpp"

namespace ftn {

/// Interleaved RGB raster with values in [0, 1].
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  RgbImage() = default;
  RgbImage(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w * 3, fill) {}

  double& at(int y, int x, int c) { return values[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const { return values[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool operator==(const RgbImage&) const = default;
};

struct SamplePair {
  RgbImage image_a;
  RgbImage image_b;
  LabelMask mask;
  std::string id;

  int height() const { return mask.height; }
  int width() const { return mask.width; }
  /// Throws InvalidInput unless all rasters align and the mask is binary.
  void validate() const;
  std::size_t change_pixels() const;
  bool operator==(const SamplePair&) const = default;
};

struct SampleLocator {
  std::string id;
  std::filesystem::path image_a;
  std::filesystem::path image_b;
  std::filesystem::path label;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::string split;
  std::vector<SampleLocator> entries;
  int tile_size = 0;  // 0 keeps samples whole
  std::uint64_t seed = 0;
};

/// Reads `<root>/<split>/{A,B,label}`; entries are sorted by id.
DatasetManifest load_manifest(const std::filesystem::path& root, const std::string& split);
SamplePair load_sample(const SampleLocator& locator);
/// Loads every entry, tiled when the manifest asks for it.
std::vector<SamplePair> load_samples(const DatasetManifest& manifest);

RgbImage load_rgb(const std::filesystem::path& path);
void save_rgb(const std::filesystem::path& path, const RgbImage& image);

/// Maps 0/255 to 0/1; any other value throws IngestionError naming `what`.
LabelMask decode_label(const std::vector<std::uint16_t>& gray, int height, int width, const std::string& what);

void write_sample(const std::filesystem::path& split_dir, const SamplePair& pair);
void write_dataset(const std::filesystem::path& root, const std::string& split, const std::vector<SamplePair>& pairs);

/// Non-overlapping grid of size x size tiles; the remainder is dropped.
std::vector<SamplePair> tile(const SamplePair& pair, int size);

/// k quarter turns counter-clockwise, then an optional horizontal flip.
struct Transform {
  int rotations = 0;
  bool flip = false;
  bool identity() const { return rotations == 0 && !flip; }
};

Transform pick_transform(std::uint64_t seed);
SamplePair apply_transform(const SamplePair& pair, Transform t);
SamplePair augment(const SamplePair& pair, std::uint64_t seed);

/// Bilinear for images, nearest for the mask.
SamplePair resize(const SamplePair& pair, int target);

struct SynthOptions {
  /// Per-channel difference that counts as change before noise is added.
  double change_floor = 0.08;
  double noise_sigma = 0.02;
  double min_change_fraction = 0.01;
  double max_change_fraction = 0.5;
};

std::vector<SamplePair> synth_generate(std::uint64_t seed, int n, int size, const SynthOptions& options = {});

/// Seeded permutation of [0, n).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

}  // namespace ftn
