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

// Synthetic junction scenarios: a target vehicle approaches an intersection
// and either turns left, continues straight, or turns right. Each scenario
// is placed at a random world pose so normalization has real work to do.

#pragma once

#include <string>
#include <vector>

#include "mmp/scenario.hpp"

namespace mmp {

struct SyntheticConfig {
  int count = 1000;
  int t_obs = 20;  // history steps at 10 Hz (2 s)
  int t_future = 30;  // future steps at 10 Hz (3 s)
  double dt = 0.1;
  std::vector<std::string> modes = {"left", "straight", "right"};
  double speed_min = 5.0;   // m/s along the path
  double speed_max = 10.0;
  double turn_radius = 8.0;  // quarter-arc radius at the junction
  double arm_length = 60.0;  // junction arm extent from the center
  double noise_std = 0.02;   // per-point position jitter
  int neighbors_min = 1;
  int neighbors_max = 3;
  double world_shift = 30.0;  // uniform translation range for world placement

  std::string to_json_text() const;
  static SyntheticConfig from_json_text(const std::string& text);
};

// Deterministic in (config, seed): scenario i draws only from a generator
// seeded with derive_seed(seed, i).
Dataset generate_synthetic_dataset(const SyntheticConfig& config,
                                   std::uint64_t seed,
                                   const std::string& split = "train");

}  // namespace mmp
