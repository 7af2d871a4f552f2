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

#include "mmp/checkpoint.hpp"

#include <json.hpp>

namespace mmp {

namespace detail {

using json = nlohmann::json;

std::string meta_to_json(const CheckpointMeta& meta) {
  json j;
  j["model_config"] = json::parse(meta.model_config_json);
  j["seed"] = meta.seed;
  j["partition_ref"] = meta.partition_ref;
  j["strategy"] = meta.strategy;
  return j.dump();
}

CheckpointMeta meta_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("checkpoint meta: malformed JSON (" +
                     std::string(e.what()) + ")");
  }
  CheckpointMeta meta;
  if (j.contains("model_config")) meta.model_config_json = j["model_config"].dump();
  meta.seed = j.value("seed", std::uint64_t{0});
  meta.partition_ref = j.value("partition_ref", std::string());
  meta.strategy = j.value("strategy", std::string("rts"));
  return meta;
}

}  // namespace detail

std::uint32_t checkpoint_scalar_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, detail::kCheckpointMagic, sizeof(magic)) != 0) {
    throw ParseError("not a checkpoint file: " + path);
  }
  return detail::read_pod<std::uint32_t>(in);
}

CheckpointMeta peek_checkpoint_meta(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, detail::kCheckpointMagic, sizeof(magic)) != 0) {
    throw ParseError("not a checkpoint file: " + path);
  }
  (void)detail::read_pod<std::uint32_t>(in);
  const auto meta_len = detail::read_pod<std::uint64_t>(in);
  std::string meta_json(meta_len, '\0');
  in.read(meta_json.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw ParseError("checkpoint truncated");
  return detail::meta_from_json(meta_json);
}

}  // namespace mmp
