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

#include "ftn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "ftn/errors.hpp"

namespace ftn {

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const std::string t = trim(text);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError("config key " + key + ": cannot parse \"" + text + "\"");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError("config key " + key + ": expected true or false, got \"" + text + "\"");
}

template <class T, std::size_t N>
std::array<T, N> parse_list(const std::string& key, const std::string& text) {
  std::array<T, N> out{};
  std::stringstream ss(text);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i == N) throw ConfigError("config key " + key + ": expected " + std::to_string(N) + " values");
    out[i++] = parse_number<T>(key, item);
  }
  if (i != N) throw ConfigError("config key " + key + ": expected " + std::to_string(N) + " values");
  return out;
}

template <class T, std::size_t N>
std::string format_list(const std::array<T, N>& values) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) out += format_double(values[i]);
    else out += std::to_string(values[i]);
  }
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

#define FTN_DOUBLE(name)                                                         \
  Field{#name, [](const TrainConfig& c) { return format_double(c.name); },     \
        [](TrainConfig& c, const std::string& v) { c.name = parse_number<double>(#name, v); }}
#define FTN_INT(name)                                                            \
  Field{#name, [](const TrainConfig& c) { return std::to_string(c.name); },    \
        [](TrainConfig& c, const std::string& v) { c.name = parse_number<decltype(c.name)>(#name, v); }}
#define FTN_BOOL(name)                                                                 \
  Field{#name, [](const TrainConfig& c) { return std::string(c.name ? "true" : "false"); }, \
        [](TrainConfig& c, const std::string& v) { c.name = parse_bool(#name, v); }}
#define FTN_STRING(name)                                    \
  Field{#name, [](const TrainConfig& c) { return c.name; }, \
        [](TrainConfig& c, const std::string& v) { c.name = trim(v); }}
#define FTN_LIST(name, T)                                                      \
  Field{#name, [](const TrainConfig& c) { return format_list(c.name); },     \
        [](TrainConfig& c, const std::string& v) { c.name = parse_list<T, std::tuple_size_v<decltype(c.name)>>(#name, v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      FTN_DOUBLE(lr),
      FTN_DOUBLE(momentum),
      FTN_DOUBLE(weight_decay),
      FTN_INT(batch_size),
      FTN_INT(epochs),
      FTN_DOUBLE(lr_decay_factor),
      FTN_INT(lr_decay_every),
      FTN_DOUBLE(new_layer_lr_multiplier),
      FTN_INT(max_steps),
      FTN_INT(val_every),
      FTN_STRING(dataset_root),
      FTN_STRING(train_split),
      FTN_STRING(val_split),
      FTN_INT(input_size),
      FTN_INT(tile_size),
      FTN_BOOL(augment),
      FTN_INT(synth_count),
      FTN_INT(synth_val_count),
      FTN_INT(synth_seed),
      FTN_INT(patch_size),
      FTN_INT(embed_dim),
      FTN_LIST(stage_depths, int),
      FTN_LIST(stage_heads, int),
      FTN_INT(window_size),
      FTN_INT(extra_stage_depth),
      FTN_INT(reduce_to),
      FTN_DOUBLE(mlp_ratio),
      FTN_BOOL(use_dfe),
      FTN_BOOL(use_pam),
      FTN_STRING(decoder),
      FTN_LIST(decoder_depths, int),
      FTN_INT(decoder_heads),
      FTN_INT(decoder_window),
      FTN_STRING(pretrained),
      FTN_BOOL(use_bce),
      FTN_BOOL(weighted_bce),
      FTN_BOOL(use_ssim),
      FTN_BOOL(use_siou),
      FTN_LIST(side_weights, double),
      FTN_DOUBLE(boundary_weight),
      FTN_INT(ssim_window),
      FTN_STRING(weight_reference),
      FTN_INT(seed),
      FTN_STRING(out_dir),
  };
  return table;
}

#undef FTN_DOUBLE
#undef FTN_INT
#undef FTN_BOOL
#undef FTN_STRING
#undef FTN_LIST

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must lie in [0, 1)");
  if (weight_decay < 0) throw ConfigError("weight_decay must be non-negative");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2 for batch normalization");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(lr_decay_factor > 0) || lr_decay_factor > 1) throw ConfigError("lr_decay_factor must lie in (0, 1]");
  if (lr_decay_every < 1) throw ConfigError("lr_decay_every must be at least 1");
  if (!(new_layer_lr_multiplier > 0)) throw ConfigError("new_layer_lr_multiplier must be positive");
  if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
  if (val_every < 1) throw ConfigError("val_every must be at least 1");
  if (input_size < 32) throw ConfigError("input_size must be at least 32");
  if (tile_size < 0) throw ConfigError("tile_size must be non-negative");
  if (dataset_root.empty() && synth_count < 1) throw ConfigError("synth_count must be at least 1");
  if (synth_val_count < 0) throw ConfigError("synth_val_count must be non-negative");
  if (decoder != "pcp" && decoder != "fp") throw ConfigError("decoder must be pcp or fp, got " + decoder);
  if (weight_reference != "label" && weight_reference != "prediction") {
    throw ConfigError("weight_reference must be label or prediction");
  }
  model_config().validate();
  loss_config({0.5, 0.5}).validate();
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.encoder.patch_size = patch_size;
  m.encoder.embed_dim = embed_dim;
  m.encoder.stage_depths = stage_depths;
  m.encoder.stage_heads = stage_heads;
  m.encoder.window_size = window_size;
  m.encoder.extra_stage_depth = extra_stage_depth;
  m.encoder.reduce_to = reduce_to;
  m.encoder.mlp_ratio = mlp_ratio;
  m.decoder.swin_depths = decoder_depths;
  m.decoder.heads = decoder_heads;
  m.decoder.window_size = decoder_window;
  m.decoder.mlp_ratio = mlp_ratio;
  m.decoder.kind = decoder == "fp" ? DecoderKind::fp : DecoderKind::pcp;
  m.use_dfe = use_dfe;
  m.use_pam = use_pam;
  return m;
}

LossConfig TrainConfig::loss_config(std::array<double, 2> class_frequencies) const {
  LossConfig l;
  l.class_frequencies = class_frequencies;
  l.boundary_weight = boundary_weight;
  l.ssim_window = ssim_window;
  l.side_weights = side_weights;
  l.use_bce = use_bce;
  l.weighted_bce = weighted_bce;
  l.use_ssim = use_ssim;
  l.use_siou = use_siou;
  l.weight_reference = weight_reference == "prediction" ? WeightReference::prediction : WeightReference::label;
  return l;
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& f : fields()) out[f.key] = f.get(*this);
  return out;
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + "=" + f.get(*this) + "\n";
  return out;
}

TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& values, TrainConfig base) {
  for (const auto& [key, value] : values) {
    const Field* field = nullptr;
    for (const auto& f : fields()) {
      if (key == f.key) field = &f;
    }
    if (!field) throw ConfigError("unknown config key: " + key);
    field->set(base, value);
  }
  return base;
}

TrainConfig TrainConfig::from_text(const std::string& text, TrainConfig base) {
  std::map<std::string, std::string> values;
  std::istringstream is(text);
  int line_no = 0;
  for (std::string line; std::getline(is, line);) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    if (values.count(key)) throw ConfigError("config key " + key + " given twice");
    values[key] = t.substr(eq + 1);
  }
  return from_map(values, std::move(base));
}

TrainConfig TrainConfig::full() { return TrainConfig{}; }

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  const EncoderConfig e = EncoderConfig::desk();
  c.patch_size = e.patch_size;
  c.embed_dim = e.embed_dim;
  c.stage_depths = e.stage_depths;
  c.stage_heads = e.stage_heads;
  c.window_size = e.window_size;
  c.extra_stage_depth = e.extra_stage_depth;
  c.reduce_to = e.reduce_to;
  c.decoder_heads = 2;
  c.decoder_window = e.window_size;
  c.input_size = 64;
  c.tile_size = 0;
  c.synth_count = 8;
  c.synth_val_count = 0;
  c.batch_size = 4;
  c.epochs = 250;
  c.max_steps = 500;
  c.lr = 1e-3;
  c.lr_decay_every = 1000;
  c.val_every = 50;
  c.augment = false;
  c.out_dir = "runs/desk";
  return c;
}

TrainConfig TrainConfig::profile(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "full") return full();
  throw ConfigError("unknown profile " + name + " (expected desk or full)");
}

std::vector<std::string> TrainConfig::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

TrainConfig load_config_file(const std::filesystem::path& path, const TrainConfig& base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return TrainConfig::from_text(ss.str(), base);
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) throw InvalidInput("lr_schedule: epoch outside [0, epochs)");
  // Repeated multiplication keeps 1e-3 -> 1e-4 -> 1e-5 exact in binary64.
  double lr = cfg.lr;
  for (int k = 0; k < epoch / cfg.lr_decay_every; ++k) lr *= cfg.lr_decay_factor;
  return lr;
}

}  // namespace ftn
