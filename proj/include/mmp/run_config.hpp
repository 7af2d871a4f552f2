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

#ifndef MMP_RUN_CONFIG_HPP_
#define MMP_RUN_CONFIG_HPP_

#include <cstdint>
#include <string>

#include "mmp/evaluation.hpp"
#include "mmp/model.hpp"
#include "mmp/synthetic.hpp"
#include "mmp/trainer.hpp"

namespace mmp {

// Aggregate settings for one CLI run. A JSON config file mirrors this
// structure; individual command-line flags override fields loaded from it.
struct RunConfig {
  std::string dataset;
  std::string partition;
  std::string checkpoint;
  std::string out;

  std::uint64_t seed = 0;
  std::string precision = "f64";  // f32 or f64

  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  SyntheticConfig synthetic;

  // gen-data settings.
  std::string split = "train";
  // fit-partition settings.
  std::string partition_method = "kmeans";

  void validate() const;
  std::string to_json_text() const;
  static RunConfig from_json_text(const std::string& text);
};

RunConfig load_run_config(const std::string& path);

}  // namespace mmp

#endif  // MMP_RUN_CONFIG_HPP_
