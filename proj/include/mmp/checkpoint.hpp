/* Copyright 2026 The mmpred Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Checkpoint container: a JSON meta blob (model config, seed, partition
// reference) followed by raw little-endian parameter tensors. Loading is
// bit-exact at the stored precision.
//
// Layout: magic "MMPCKPT1" | u32 scalar_bytes | u64 meta_len | meta JSON |
// u64 param_count | per param: u32 name_len, name, u64 rows, u64 cols, data.

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "mmp/nn.hpp"

namespace mmp {

struct CheckpointMeta {
  std::string model_config_json = "{}";
  std::uint64_t seed = 0;
  std::string partition_ref;  // path or empty
  std::string strategy = "rts";
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'M', 'M', 'P', 'C',
                                             'K', 'P', 'T', '1'};

template <class T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("checkpoint truncated");
  return v;
}

inline void write_string(std::ofstream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::ifstream& in) {
  const auto len = read_pod<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw ParseError("checkpoint truncated");
  return s;
}

std::string meta_to_json(const CheckpointMeta& meta);
CheckpointMeta meta_from_json(const std::string& text);

}  // namespace detail

template <class S>
void save_checkpoint(const std::string& path, const ParamStore<S>& store,
                     const CheckpointMeta& meta) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    out.write(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
    detail::write_pod<std::uint32_t>(out, sizeof(S));
    const std::string meta_json = detail::meta_to_json(meta);
    detail::write_pod<std::uint64_t>(out, meta_json.size());
    out.write(meta_json.data(),
              static_cast<std::streamsize>(meta_json.size()));
    detail::write_pod<std::uint64_t>(out, store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
      const Param<S>& p = store.at(static_cast<int>(i));
      detail::write_string(out, p.name);
      detail::write_pod<std::uint64_t>(
          out, static_cast<std::uint64_t>(p.value.rows()));
      detail::write_pod<std::uint64_t>(
          out, static_cast<std::uint64_t>(p.value.cols()));
      out.write(reinterpret_cast<const char*>(p.value.data()),
                static_cast<std::streamsize>(sizeof(S) * p.value.size()));
    }
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

// Reads the meta blob only (used to reconstruct the model before loading
// the tensors into its parameter store).
CheckpointMeta peek_checkpoint_meta(const std::string& path);

// Stored scalar width in bytes (4 = float, 8 = double).
std::uint32_t checkpoint_scalar_bytes(const std::string& path);

// Fills an existing store (same architecture) with the stored tensors.
// Rejects precision, name, shape or count mismatches.
template <class S>
CheckpointMeta load_checkpoint(const std::string& path, ParamStore<S>& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, detail::kCheckpointMagic, sizeof(magic)) != 0) {
    throw ParseError("not a checkpoint file: " + path);
  }
  const auto scalar_bytes = detail::read_pod<std::uint32_t>(in);
  if (scalar_bytes != sizeof(S)) {
    throw ConfigError("checkpoint stores " + std::to_string(scalar_bytes * 8) +
                      "-bit scalars; this model uses " +
                      std::to_string(sizeof(S) * 8) + "-bit");
  }
  const auto meta_len = detail::read_pod<std::uint64_t>(in);
  std::string meta_json(meta_len, '\0');
  in.read(meta_json.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw ParseError("checkpoint truncated");
  const auto count = detail::read_pod<std::uint64_t>(in);
  if (count != store.size()) {
    throw ConfigError("checkpoint has " + std::to_string(count) +
                      " parameters; model expects " +
                      std::to_string(store.size()));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = detail::read_string(in);
    const auto rows = detail::read_pod<std::uint64_t>(in);
    const auto cols = detail::read_pod<std::uint64_t>(in);
    const int idx = store.find(name);
    if (idx < 0) throw ConfigError("checkpoint parameter not in model: " + name);
    Param<S>& p = store.at(idx);
    if (static_cast<std::uint64_t>(p.value.rows()) != rows ||
        static_cast<std::uint64_t>(p.value.cols()) != cols) {
      throw ConfigError("shape mismatch for parameter " + name);
    }
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(sizeof(S) * p.value.size()));
    if (!in) throw ParseError("checkpoint truncated");
  }
  return detail::meta_from_json(meta_json);
}

}  // namespace mmp
