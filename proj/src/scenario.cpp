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

#include "mmp/scenario.hpp"

#include <algorithm>

namespace mmp {

int tag_code_of(const std::string& tag) { return tag == "centerline" ? 0 : 1; }

namespace {

Eigen::Index last_valid_index(const VehicleTrack& t) {
  for (Eigen::Index i = t.steps(); i-- > 0;) {
    if (t.valid[i]) return i;
  }
  return -1;
}

void check_track(const VehicleTrack& t, const char* what) {
  if (t.steps() == 0) {
    throw ContractError(std::string(what) + " history is empty");
  }
  if (static_cast<Eigen::Index>(t.valid.size()) != t.steps()) {
    throw ContractError(std::string(what) +
                        " validity flags do not match history length");
  }
  if (!t.points.allFinite()) {
    throw ValueError(std::string(what) + " history has non-finite coordinates");
  }
}

VehicleTrack transform_track(const VehicleTrack& t, const RigidFrame& f) {
  VehicleTrack out = t;
  out.points = f.to_local(t.points);
  return out;
}

}  // namespace

Vec2 estimate_heading(const VehicleTrack& track, double min_baseline) {
  std::vector<Eigen::Index> vi;
  for (Eigen::Index i = 0; i < track.steps(); ++i) {
    if (track.valid[i]) vi.push_back(i);
  }
  if (vi.size() >= 2) {
    const Vec2 h = track.points.row(vi[vi.size() - 1]) -
                   track.points.row(vi[vi.size() - 2]);
    if (h.norm() > min_baseline) return h;
  }
  // Fallback: displacement between the two widest-separated valid points,
  // oriented from the earlier to the later one.
  double best = 0.0;
  Vec2 disp = Vec2::Zero();
  for (std::size_t a = 0; a < vi.size(); ++a) {
    for (std::size_t b = a + 1; b < vi.size(); ++b) {
      const Vec2 d = track.points.row(vi[b]) - track.points.row(vi[a]);
      if (d.norm() > best) {
        best = d.norm();
        disp = d;
      }
    }
  }
  return best > min_baseline ? disp : Vec2::Zero();
}

Scenario normalize_scenario(const Scenario& raw) {
  check_track(raw.target_history, "target");
  for (const VehicleTrack& n : raw.neighbor_histories) check_track(n, "neighbor");
  const Eigen::Index last = last_valid_index(raw.target_history);
  if (last < 0) throw ContractError("target history has no valid step");

  RigidFrame f;
  f.origin = raw.target_history.points.row(last);
  const Vec2 heading = estimate_heading(raw.target_history);
  bool degenerate = false;
  if (heading.norm() > 0.0) {
    f.rotation = heading_to_rotation(heading);
  } else {
    f.rotation = 0.0;
    degenerate = true;
  }

  Scenario out = raw;
  out.target_history = transform_track(raw.target_history, f);
  for (VehicleTrack& n : out.neighbor_histories) {
    n.points = f.to_local(n.points);
  }
  for (MapPolyline& p : out.map_polylines) {
    p.points = f.to_local(p.points);
  }
  if (raw.has_future()) out.future = f.to_local(raw.future);
  out.frame.frame = compose(raw.frame.frame, f);
  out.frame.degenerate_heading = degenerate || raw.frame.degenerate_heading;
  out.normalized = true;
  return out;
}

Points denormalize_trajectory(const Points& traj, const NormalizationFrame& f) {
  return f.frame.to_world(traj);
}

PolylineSet crop_and_vectorize_map(const Scenario& scenario,
                                   double window_meters) {
  const double half = window_meters / 2.0;
  PolylineSet out;
  for (const MapPolyline& poly : scenario.map_polylines) {
    const int code = tag_code_of(poly.tag);
    bool kept_any = false;
    for (Eigen::Index i = 0; i + 1 < poly.points.rows(); ++i) {
      const Vec2 a = poly.points.row(i);
      const Vec2 b = poly.points.row(i + 1);
      auto clipped = clip_segment_to_box(a, b, half, half);
      if (!clipped) continue;
      PolyVector v;
      v.start = clipped->first;
      v.end = clipped->second;
      v.tag_code = code;
      v.polyline = out.polyline_count;
      out.vectors.push_back(v);
      kept_any = true;
    }
    if (kept_any) ++out.polyline_count;
  }
  return out;
}

Scenario flip_scenario(const Scenario& s) {
  Scenario out = s;
  out.target_history.points.col(0) *= -1.0;
  for (VehicleTrack& n : out.neighbor_histories) n.points.col(0) *= -1.0;
  for (MapPolyline& p : out.map_polylines) p.points.col(0) *= -1.0;
  if (s.has_future()) out.future.col(0) *= -1.0;
  return out;
}

Scenario mask_history_prefix(const Scenario& s, int prefix_len) {
  Scenario out = s;
  const int limit = std::min<int>(10, prefix_len);
  auto mask = [&](VehicleTrack& t) {
    const int n = std::min<int>(limit, static_cast<int>(t.steps()));
    for (int i = 0; i < n; ++i) t.valid[i] = 0;
  };
  mask(out.target_history);
  for (VehicleTrack& n : out.neighbor_histories) mask(n);
  return out;
}

Scenario augment_scenario(const Scenario& s, Rng& rng,
                          const AugmentConfig& cfg) {
  Scenario out = s;
  if (rng.bernoulli(cfg.p_flip)) out = flip_scenario(out);
  if (rng.bernoulli(cfg.p_mask)) {
    const int prefix = 1 + static_cast<int>(rng.uniform_int(10));
    out = mask_history_prefix(out, prefix);
  }
  return out;
}

}  // namespace mmp
