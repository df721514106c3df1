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

#include "ftn/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ftn/errors.hpp"
#include "ftn/png_io.hpp"
#include "ftn/random.hpp"

namespace fs = std::filesystem;

namespace ftn {

void SamplePair::validate() const {
  if (image_a.height != mask.height || image_a.width != mask.width || image_b.height != mask.height ||
      image_b.width != mask.width) {
    throw InvalidInput("sample " + id + ": image and mask dimensions differ");
  }
  if (image_a.values.size() != mask.size() * 3 || image_b.values.size() != mask.size() * 3) {
    throw InvalidInput("sample " + id + ": raster storage does not match dimensions");
  }
  for (auto v : mask.values) {
    if (v > 1) throw InvalidInput("sample " + id + ": mask is not binary");
  }
}

std::size_t SamplePair::change_pixels() const {
  return static_cast<std::size_t>(std::count(mask.values.begin(), mask.values.end(), std::uint8_t{1}));
}

// ---- ingestion -------------------------------------------------------------

namespace {

std::vector<std::string> png_stems(const fs::path& dir) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path().stem().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

RgbImage to_rgb(const PngImage& png) {
  RgbImage img(png.height, png.width);
  const double scale = png.bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t pixels = static_cast<std::size_t>(png.height) * png.width;
  for (std::size_t i = 0; i < pixels; ++i) {
    for (int c = 0; c < 3; ++c) {
      const int src = png.channels == 3 ? c : 0;
      img.values[i * 3 + c] = png.samples[i * png.channels + src] / scale;
    }
  }
  return img;
}

PngImage from_rgb(const RgbImage& img) {
  PngImage png{img.width, img.height, 3, 8, {}};
  png.samples.resize(img.values.size());
  for (std::size_t i = 0; i < img.values.size(); ++i) {
    png.samples[i] = static_cast<std::uint16_t>(std::lround(std::clamp(img.values[i], 0.0, 1.0) * 255.0));
  }
  return png;
}

}  // namespace

RgbImage load_rgb(const fs::path& path) { return to_rgb(read_png(path)); }
void save_rgb(const fs::path& path, const RgbImage& image) { write_png(path, from_rgb(image)); }

LabelMask decode_label(const std::vector<std::uint16_t>& gray, int height, int width, const std::string& what) {
  LabelMask mask(height, width);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto v = gray[i];
    if (v == 0) {
      mask.values[i] = 0;
    } else if (v == 255) {
      mask.values[i] = 1;
    } else {
      throw IngestionError("label " + what + " holds value " + std::to_string(v) + "; only 0 and 255 are accepted");
    }
  }
  return mask;
}

DatasetManifest load_manifest(const fs::path& root, const std::string& split) {
  const fs::path dir = root / split;
  if (!fs::is_directory(dir)) throw IngestionError("missing split directory " + dir.string());
  DatasetManifest m;
  m.root = root;
  m.split = split;
  const auto a = png_stems(dir / "A");
  const auto b = png_stems(dir / "B");
  const auto l = png_stems(dir / "label");
  std::vector<std::string> all;
  all.insert(all.end(), a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  all.insert(all.end(), l.begin(), l.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  for (const auto& id : all) {
    const bool in_a = std::binary_search(a.begin(), a.end(), id);
    const bool in_b = std::binary_search(b.begin(), b.end(), id);
    const bool in_l = std::binary_search(l.begin(), l.end(), id);
    if (!(in_a && in_b && in_l)) {
      std::string missing;
      if (!in_a) missing += " A";
      if (!in_b) missing += " B";
      if (!in_l) missing += " label";
      throw IngestionError("sample \"" + id + "\" has no counterpart in" + missing);
    }
    const std::string file = id + ".png";
    m.entries.push_back({id, dir / "A" / file, dir / "B" / file, dir / "label" / file});
  }
  return m;
}

SamplePair load_sample(const SampleLocator& loc) {
  SamplePair s;
  s.id = loc.id;
  s.image_a = to_rgb(read_png(loc.image_a));
  s.image_b = to_rgb(read_png(loc.image_b));
  const PngImage label = read_png(loc.label);
  std::vector<std::uint16_t> gray(static_cast<std::size_t>(label.width) * label.height);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    gray[i] = label.samples[i * label.channels];
    for (int c = 1; c < label.channels; ++c) {
      if (label.samples[i * label.channels + c] != gray[i]) {
        throw IngestionError("label " + loc.id + " is not grayscale");
      }
    }
  }
  s.mask = decode_label(gray, label.height, label.width, loc.id);
  if (s.image_a.height != s.mask.height || s.image_a.width != s.mask.width || s.image_b.height != s.mask.height ||
      s.image_b.width != s.mask.width) {
    throw IngestionError("sample " + loc.id + ": A, B and label dimensions differ");
  }
  return s;
}

std::vector<SamplePair> load_samples(const DatasetManifest& manifest) {
  std::vector<SamplePair> out;
  for (const auto& loc : manifest.entries) {
    SamplePair s = load_sample(loc);
    if (manifest.tile_size > 0) {
      for (auto& t : tile(s, manifest.tile_size)) out.push_back(std::move(t));
    } else {
      out.push_back(std::move(s));
    }
  }
  return out;
}

void write_sample(const fs::path& split_dir, const SamplePair& pair) {
  pair.validate();
  const std::string file = pair.id + ".png";
  write_png(split_dir / "A" / file, from_rgb(pair.image_a));
  write_png(split_dir / "B" / file, from_rgb(pair.image_b));
  PngImage label{pair.width(), pair.height(), 1, 8, {}};
  label.samples.resize(pair.mask.size());
  for (std::size_t i = 0; i < pair.mask.size(); ++i) label.samples[i] = pair.mask.values[i] ? 255 : 0;
  write_png(split_dir / "label" / file, label);
}

void write_dataset(const fs::path& root, const std::string& split, const std::vector<SamplePair>& pairs) {
  for (const auto& p : pairs) write_sample(root / split, p);
}

// ---- geometry --------------------------------------------------------------

std::vector<SamplePair> tile(const SamplePair& pair, int size) {
  if (size <= 0) throw InvalidInput("tile size must be positive");
  if (size > pair.height() || size > pair.width()) {
    throw InvalidInput("tile size " + std::to_string(size) + " exceeds sample " + pair.id);
  }
  std::vector<SamplePair> out;
  for (int ty = 0; ty + size <= pair.height(); ty += size) {
    for (int tx = 0; tx + size <= pair.width(); tx += size) {
      SamplePair t;
      t.id = pair.id + "_" + std::to_string(ty / size) + "_" + std::to_string(tx / size);
      t.image_a = RgbImage(size, size);
      t.image_b = RgbImage(size, size);
      t.mask = LabelMask(size, size);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          for (int c = 0; c < 3; ++c) {
            t.image_a.at(y, x, c) = pair.image_a.at(ty + y, tx + x, c);
            t.image_b.at(y, x, c) = pair.image_b.at(ty + y, tx + x, c);
          }
          t.mask.at(y, x) = pair.mask.at(ty + y, tx + x);
        }
      }
      out.push_back(std::move(t));
    }
  }
  return out;
}

Transform pick_transform(std::uint64_t seed) {
  Rng rng(seed);
  const int choice = static_cast<int>(rng.next() % 8);
  return {choice % 4, choice >= 4};
}

namespace {

// Source coordinate feeding output pixel (y, x) of a transformed h x w raster.
struct SourceMap {
  int out_h, out_w;
  int in_h, in_w;
  Transform t;
  std::pair<int, int> operator()(int y, int x) const {
    if (t.flip) x = out_w - 1 - x;
    int sy = y, sx = x;
    int h = out_h, w = out_w;
    // Undo quarter turns one at a time: a counter-clockwise turn maps
    // (y, x) of the input (h x w) to (w - 1 - x, y) of the output (w x h).
    for (int k = 0; k < t.rotations; ++k) {
      const int py = sx;
      const int px = h - 1 - sy;
      sy = py;
      sx = px;
      std::swap(h, w);
    }
    return {sy, sx};
  }
};

}  // namespace

SamplePair apply_transform(const SamplePair& pair, Transform t) {
  if (t.identity()) return pair;
  const bool swap = t.rotations % 2 == 1;
  const int oh = swap ? pair.width() : pair.height();
  const int ow = swap ? pair.height() : pair.width();
  SourceMap map{oh, ow, pair.height(), pair.width(), t};
  SamplePair out;
  out.id = pair.id;
  out.image_a = RgbImage(oh, ow);
  out.image_b = RgbImage(oh, ow);
  out.mask = LabelMask(oh, ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const auto [sy, sx] = map(y, x);
      for (int c = 0; c < 3; ++c) {
        out.image_a.at(y, x, c) = pair.image_a.at(sy, sx, c);
        out.image_b.at(y, x, c) = pair.image_b.at(sy, sx, c);
      }
      out.mask.at(y, x) = pair.mask.at(sy, sx);
    }
  }
  return out;
}

SamplePair augment(const SamplePair& pair, std::uint64_t seed) { return apply_transform(pair, pick_transform(seed)); }

namespace {

RgbImage resize_bilinear(const RgbImage& in, int oh, int ow) {
  RgbImage out(oh, ow);
  const double sy = static_cast<double>(in.height) / oh;
  const double sx = static_cast<double>(in.width) / ow;
  for (int y = 0; y < oh; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, in.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, in.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < ow; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, in.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, in.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = in.at(y0, x0, c) * (1 - wx) + in.at(y0, x1, c) * wx;
        const double bottom = in.at(y1, x0, c) * (1 - wx) + in.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

}  // namespace

SamplePair resize(const SamplePair& pair, int target) {
  if (target < 32) throw InvalidInput("resize target must be at least 32");
  if (pair.height() == target && pair.width() == target) return pair;
  SamplePair out;
  out.id = pair.id;
  out.image_a = resize_bilinear(pair.image_a, target, target);
  out.image_b = resize_bilinear(pair.image_b, target, target);
  out.mask = LabelMask(target, target);
  for (int y = 0; y < target; ++y) {
    const int sy = std::min(pair.height() - 1, static_cast<int>((y + 0.5) * pair.height() / target));
    for (int x = 0; x < target; ++x) {
      const int sx = std::min(pair.width() - 1, static_cast<int>((x + 0.5) * pair.width() / target));
      out.mask.at(y, x) = pair.mask.at(sy, sx);
    }
  }
  return out;
}

// ---- synthetic pairs -------------------------------------------------------

namespace {

RgbImage textured_background(Rng& rng, int size) {
  RgbImage img(size, size);
  double base[3], gy[3], gx[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.3, 0.7);
    gy[c] = rng.uniform(-0.1, 0.1);
    gx[c] = rng.uniform(-0.1, 0.1);
  }
  // Smooth value noise on a coarse lattice, bilinearly interpolated.
  const int cells = std::max(2, size / 16);
  const int lattice = cells + 1;
  std::vector<double> coarse(static_cast<std::size_t>(lattice) * lattice * 3);
  for (auto& v : coarse) v = rng.uniform(-0.08, 0.08);
  for (int y = 0; y < size; ++y) {
    const double fy = static_cast<double>(y) / (size - 1) * cells;
    const int y0 = std::min(static_cast<int>(fy), cells - 1);
    const double wy = fy - y0;
    for (int x = 0; x < size; ++x) {
      const double fx = static_cast<double>(x) / (size - 1) * cells;
      const int x0 = std::min(static_cast<int>(fx), cells - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        auto at = [&](int r, int q) { return coarse[(static_cast<std::size_t>(r) * lattice + q) * 3 + c]; };
        const double smooth = (at(y0, x0) * (1 - wx) + at(y0, x0 + 1) * wx) * (1 - wy) +
                              (at(y0 + 1, x0) * (1 - wx) + at(y0 + 1, x0 + 1) * wx) * wy;
        const double ramp = gy[c] * (2.0 * y / (size - 1) - 1.0) + gx[c] * (2.0 * x / (size - 1) - 1.0);
        img.at(y, x, c) = base[c] + ramp + smooth + rng.uniform(-0.02, 0.02);
      }
    }
  }
  return img;
}

void draw_shape(Rng& rng, RgbImage& img, const RgbImage& reference) {
  const int size = img.height;
  const int h = rng.uniform_int(std::max(2, size / 8), std::max(3, size / 3));
  const int w = rng.uniform_int(std::max(2, size / 8), std::max(3, size / 3));
  const int top = rng.uniform_int(0, size - h);
  const int left = rng.uniform_int(0, size - w);
  const bool ellipse = rng.uniform() < 0.5;
  // Colour far enough from the local background that every covered pixel
  // clears the change floor.
  double mean[3] = {0, 0, 0};
  for (int y = top; y < top + h; ++y)
    for (int x = left; x < left + w; ++x)
      for (int c = 0; c < 3; ++c) mean[c] += reference.at(y, x, c) / (h * w);
  double color[3];
  for (;;) {
    double dist = 0;
    for (int c = 0; c < 3; ++c) {
      color[c] = rng.uniform();
      dist = std::max(dist, std::abs(color[c] - mean[c]));
    }
    if (dist >= 0.45) break;
  }
  const double cy = top + (h - 1) / 2.0, cx = left + (w - 1) / 2.0;
  const double ry = h / 2.0, rx = w / 2.0;
  for (int y = top; y < top + h; ++y) {
    for (int x = left; x < left + w; ++x) {
      if (ellipse) {
        const double dy = (y - cy) / ry, dx = (x - cx) / rx;
        if (dy * dy + dx * dx > 1.0) continue;
      }
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
    }
  }
}

}  // namespace

std::vector<SamplePair> synth_generate(std::uint64_t seed, int n, int size, const SynthOptions& opt) {
  if (n < 1) throw InvalidInput("synth_generate: n must be at least 1");
  if (size < 32) throw InvalidInput("synth_generate: size must be at least 32");
  std::vector<SamplePair> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "synth_%04d", i);
    Rng rng(derive_seed(seed, id));
    SamplePair s;
    s.id = id;
    for (;;) {
      RgbImage a = textured_background(rng, size);
      RgbImage b = a;
      const int shapes = rng.uniform_int(1, 5);
      for (int k = 0; k < shapes; ++k) {
        // Inserted objects appear in B, removed ones only in A.
        if (rng.uniform() < 0.5) draw_shape(rng, b, a);
        else draw_shape(rng, a, b);
      }
      LabelMask mask(size, size);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          double diff = 0;
          for (int c = 0; c < 3; ++c) diff = std::max(diff, std::abs(b.at(y, x, c) - a.at(y, x, c)));
          mask.at(y, x) = diff > opt.change_floor ? 1 : 0;
        }
      }
      const double fraction = static_cast<double>(std::count(mask.values.begin(), mask.values.end(), 1)) / mask.size();
      if (fraction < opt.min_change_fraction || fraction > opt.max_change_fraction) continue;
      for (auto& v : a.values) v = std::clamp(v + opt.noise_sigma * rng.normal(), 0.0, 1.0);
      for (auto& v : b.values) v = std::clamp(v + opt.noise_sigma * rng.normal(), 0.0, 1.0);
      s.image_a = std::move(a);
      s.image_b = std::move(b);
      s.mask = std::move(mask);
      break;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.next() % i;
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace ftn
