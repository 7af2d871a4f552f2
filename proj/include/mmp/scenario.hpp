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

// Scene representation: vehicle tracks, map polylines, the target-centric
// normalization frame, map cropping/vectorization and training augmentation.

#pragma once

#include <string>
#include <vector>

#include "mmp/common.hpp"
#include "mmp/geometry.hpp"

namespace mmp {

// Observed positions of one vehicle; valid[i] == 0 marks step i as missing
// (coordinates at masked steps carry no information).
struct VehicleTrack {
  Points points;                    // n x 2
  std::vector<std::uint8_t> valid;  // length n

  Eigen::Index steps() const { return points.rows(); }
  int valid_count() const {
    int n = 0;
    for (std::uint8_t v : valid) n += (v != 0);
    return n;
  }
};

struct MapPolyline {
  Points points;  // p x 2, ordered along the centerline
  std::string tag = "centerline";
};

// Maps world coordinates into the target-centric frame: the target's last
// observed position sits at the origin and its heading points along +y.
struct NormalizationFrame {
  RigidFrame frame;
  // Set when the target never moved and the rotation fell back to 0.
  bool degenerate_heading = false;
};

struct Scenario {
  std::string id;
  VehicleTrack target_history;
  std::vector<VehicleTrack> neighbor_histories;
  std::vector<MapPolyline> map_polylines;
  Points future;        // T x 2, or 0 x 2 when ground truth is absent
  int mode_label = -1;  // synthetic generator label, hidden from the model
  NormalizationFrame frame;
  bool normalized = false;

  bool has_future() const { return future.rows() > 0; }
};

struct Dataset {
  std::vector<Scenario> scenarios;
  std::string split = "train";
  std::uint64_t seed = 0;
  std::string config_snapshot = "{}";  // generator config as JSON text
};

// One map segment in vector form. The polyline index groups vectors for
// pooling; it is not a model input feature (map encoding must stay invariant
// to polyline order).
struct PolyVector {
  Vec2 start;
  Vec2 end;
  int tag_code = 0;
  int polyline = 0;
};

struct PolylineSet {
  std::vector<PolyVector> vectors;
  int polyline_count = 0;
};

int tag_code_of(const std::string& tag);

// Direction of travel at the last observation: last minus second-to-last
// valid point, falling back to the widest-separated pair of valid points.
// Returns (0,0) when every valid point coincides within `min_baseline`.
Vec2 estimate_heading(const VehicleTrack& track, double min_baseline = 1e-6);

// Rigidly maps the whole scene into the target-centric frame and records the
// transform (composed with any previously recorded one, so denormalization
// always returns to the original world frame).
Scenario normalize_scenario(const Scenario& raw);

Points denormalize_trajectory(const Points& traj, const NormalizationFrame& f);

// Converts map polylines to vectors, clipping segments to the axis-aligned
// window of the given side length centered at the origin. Segments fully
// outside are dropped; crossing segments are cut at the boundary.
PolylineSet crop_and_vectorize_map(const Scenario& scenario,
                                   double window_meters = 65.0);

// Mirrors the whole scene across the y axis (negates every x coordinate).
Scenario flip_scenario(const Scenario& s);

// Marks history steps [0, prefix_len) of the target and all neighbors
// invalid; prefix_len is clamped to the first ten steps.
Scenario mask_history_prefix(const Scenario& s, int prefix_len);

struct AugmentConfig {
  double p_flip = 0.5;
  double p_mask = 0.5;
};

Scenario augment_scenario(const Scenario& s, Rng& rng,
                          const AugmentConfig& cfg = {});

}  // namespace mmp
