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

#include "ftn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ftn/errors.hpp"

namespace fs = std::filesystem;

namespace ftn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'F', 'T', 'N', 'C', 'K', 'P', 'T', '\0'};

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is, const fs::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw IngestionError("truncated checkpoint " + path.string());
  return v;
}

std::string get_string(std::istream& is, std::size_t n, const fs::path& path) {
  std::string s(n, '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) {
    throw IngestionError("truncated checkpoint " + path.string());
  }
  return s;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.value;
  }
  return nullptr;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IngestionError("cannot write " + tmp.string());
    os.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(os, ckpt.version);
    std::ostringstream meta;
    for (const auto& [k, v] : ckpt.metadata) {
      if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
        throw InvalidInput("checkpoint metadata entry " + k + " is not a single key=value line");
      }
      meta << k << '=' << v << '\n';
    }
    const std::string text = meta.str();
    put<std::uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    put<std::uint64_t>(os, ckpt.tensors.size());
    for (const auto& t : ckpt.tensors) {
      put<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
      os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      put<std::uint32_t>(os, static_cast<std::uint32_t>(t.value.rank()));
      for (int d : t.value.shape()) put<std::int32_t>(os, d);
      os.write(reinterpret_cast<const char*>(t.value.data()), static_cast<std::streamsize>(t.value.size() * sizeof(double)));
    }
    if (!os) throw IngestionError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IngestionError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw IngestionError(path.string() + " is not a checkpoint container");
  }
  Checkpoint ckpt;
  ckpt.version = get<std::uint32_t>(is, path);
  if (ckpt.version != kCheckpointVersion) {
    throw IngestionError("unsupported checkpoint version " + std::to_string(ckpt.version) + " in " + path.string());
  }
  const auto meta_len = get<std::uint64_t>(is, path);
  std::istringstream meta(get_string(is, meta_len, path));
  for (std::string line; std::getline(meta, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IngestionError("malformed metadata line in " + path.string());
    ckpt.metadata[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto count = get<std::uint64_t>(is, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = get_string(is, get<std::uint32_t>(is, path), path);
    const auto rank = get<std::uint32_t>(is, path);
    if (rank > 8) throw IngestionError("tensor " + t.name + " has implausible rank");
    Shape shape(rank);
    for (auto& d : shape) {
      d = get<std::int32_t>(is, path);
      if (d < 0) throw IngestionError("tensor " + t.name + " has a negative dimension");
    }
    t.value = Tensor(shape);
    if (t.value.size() && !is.read(reinterpret_cast<char*>(t.value.data()),
                                   static_cast<std::streamsize>(t.value.size() * sizeof(double)))) {
      throw IngestionError("truncated checkpoint " + path.string());
    }
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

std::vector<NamedTensor> snapshot_parameters(const ParameterStore& store) {
  std::vector<NamedTensor> out;
  for (const auto& p : store.parameters()) out.push_back({p.name, p.var.value()});
  return out;
}

std::size_t restore_parameters(ParameterStore& store, const Checkpoint& ckpt, bool require_all) {
  std::size_t restored = 0;
  for (auto& p : store.parameters()) {
    const Tensor* t = ckpt.find(p.name);
    if (!t) {
      if (require_all) throw IngestionError("checkpoint lacks parameter " + p.name);
      continue;
    }
    if (t->shape() != p.var.shape()) {
      throw ConfigError("parameter " + p.name + " has shape " + shape_string(t->shape()) + " in checkpoint, model expects " +
                        shape_string(p.var.shape()));
    }
    p.var.value_mut() = *t;
    ++restored;
  }
  return restored;
}

}  // namespace ftn
