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

#include "mmp/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace mmp {

namespace {

using json = nlohmann::json;

enum class Mode { kLeft = 0, kStraight = 1, kRight = 2 };

Mode mode_from_name(const std::string& name) {
  if (name == "left") return Mode::kLeft;
  if (name == "straight") return Mode::kStraight;
  if (name == "right") return Mode::kRight;
  throw ConfigError("unknown mode name: " + name);
}

// Position along the target's path, parameterized by arc length. The path
// runs up the south arm, through a quarter arc of radius r at the junction
// center (or straight through), and out along the exit arm.
Vec2 path_point(Mode mode, double s, double approach_len, double r) {
  if (s <= approach_len) return {0.0, s - approach_len};
  const double s_past = s - approach_len;
  if (mode == Mode::kStraight) return {0.0, s_past};
  const double arc_len = M_PI / 2.0 * r;
  const double sign = mode == Mode::kLeft ? -1.0 : 1.0;
  if (s_past <= arc_len) {
    const double phi = s_past / r;
    return {sign * (r - r * std::cos(phi)), r * std::sin(phi)};
  }
  return {sign * (r + (s_past - arc_len)), r};
}

void apply_world_pose(Points& pts, double angle, const Vec2& shift) {
  pts = (pts * rotation2d(angle).transpose()).rowwise() + shift.transpose();
}

Points sample_arm(const Vec2& from, const Vec2& to, double step) {
  const double len = (to - from).norm();
  const int n = std::max(2, static_cast<int>(std::floor(len / step)) + 1);
  Points pts(n, 2);
  for (int i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / (n - 1);
    pts.row(i) = from + u * (to - from);
  }
  return pts;
}

void validate(const SyntheticConfig& c) {
  if (c.modes.empty()) throw ConfigError("synthetic config has zero modes");
  if (c.count < 0) throw ConfigError("synthetic count must be >= 0");
  if (c.t_obs < 2) throw ConfigError("t_obs must be >= 2");
  if (c.t_future < 1) throw ConfigError("t_future must be >= 1");
  if (c.dt <= 0.0) throw ConfigError("dt must be positive");
  if (c.speed_min <= 0.0 || c.speed_max < c.speed_min) {
    throw ConfigError("invalid speed range");
  }
  if (c.turn_radius <= 0.0) throw ConfigError("turn radius must be positive");
  const double history_span =
      c.speed_max * c.dt * (c.t_obs - 1) + 10.0;
  if (c.arm_length < history_span) {
    throw ConfigError("arm_length too short for the configured history span");
  }
}

Scenario generate_one(const SyntheticConfig& c, Rng& rng, int index,
                      const std::string& split) {
  const Mode mode = mode_from_name(
      c.modes[static_cast<std::size_t>(rng.uniform_int(c.modes.size()))]);
  const double speed = rng.uniform(c.speed_min, c.speed_max);
  const double dist_to_junction = rng.uniform(2.0, 8.0);
  const double world_angle = rng.uniform(0.0, 2.0 * M_PI);
  const Vec2 world_shift(rng.uniform(-c.world_shift, c.world_shift),
                         rng.uniform(-c.world_shift, c.world_shift));

  Scenario s;
  char id[64];
  std::snprintf(id, sizeof(id), "%s-%06d", split.c_str(), index);
  s.id = id;
  s.mode_label = static_cast<int>(mode);

  const double s_now = c.arm_length - dist_to_junction;
  auto at_time = [&](double t) {
    return path_point(mode, s_now + speed * t, c.arm_length, c.turn_radius);
  };

  s.target_history.points.resize(c.t_obs, 2);
  s.target_history.valid.assign(c.t_obs, 1);
  for (int i = 0; i < c.t_obs; ++i) {
    const double t = (i - (c.t_obs - 1)) * c.dt;
    s.target_history.points.row(i) = at_time(t);
  }
  s.future.resize(c.t_future, 2);
  for (int i = 0; i < c.t_future; ++i) {
    s.future.row(i) = at_time((i + 1) * c.dt);
  }

  const Vec2 center(0.0, 0.0);
  const double step = 5.0;
  const Vec2 arm_ends[4] = {{0.0, -c.arm_length},
                            {0.0, c.arm_length},
                            {-c.arm_length, 0.0},
                            {c.arm_length, 0.0}};
  for (int a = 0; a < 4; ++a) {
    MapPolyline poly;
    poly.tag = "centerline";
    poly.points = a == 0 ? sample_arm(arm_ends[a], center, step)
                         : sample_arm(center, arm_ends[a], step);
    s.map_polylines.push_back(std::move(poly));
  }

  const int n_neighbors =
      c.neighbors_min +
      static_cast<int>(rng.uniform_int(
          static_cast<std::uint64_t>(c.neighbors_max - c.neighbors_min + 1)));
  for (int v = 0; v < n_neighbors; ++v) {
    const bool horizontal = rng.bernoulli(0.5);
    const double direction = rng.bernoulli(0.5) ? 1.0 : -1.0;
    const double nb_speed = rng.uniform(3.0, 8.0);
    const double u_now = rng.uniform(-0.7 * c.arm_length, 0.7 * c.arm_length);
    const double lane_offset = rng.uniform(2.0, 4.0);
    const bool late = rng.bernoulli(0.25);
    const int first_valid =
        late ? 1 + static_cast<int>(rng.uniform_int(
                       static_cast<std::uint64_t>(c.t_obs / 2)))
             : 0;
    VehicleTrack nb;
    nb.points.resize(c.t_obs, 2);
    nb.valid.assign(c.t_obs, 1);
    for (int i = 0; i < c.t_obs; ++i) {
      const double t = (i - (c.t_obs - 1)) * c.dt;
      const double u = u_now + direction * nb_speed * t;
      nb.points.row(i) = horizontal ? Vec2(u, lane_offset * direction)
                                    : Vec2(-lane_offset * direction, u);
      if (i < first_valid) nb.valid[i] = 0;
    }
    s.neighbor_histories.push_back(std::move(nb));
  }

  if (c.noise_std > 0.0) {
    for (int i = 0; i < c.t_obs; ++i) {
      s.target_history.points(i, 0) += rng.gaussian(0.0, c.noise_std);
      s.target_history.points(i, 1) += rng.gaussian(0.0, c.noise_std);
    }
    for (int i = 0; i < c.t_future; ++i) {
      s.future(i, 0) += rng.gaussian(0.0, c.noise_std);
      s.future(i, 1) += rng.gaussian(0.0, c.noise_std);
    }
    for (VehicleTrack& nb : s.neighbor_histories) {
      for (Eigen::Index i = 0; i < nb.steps(); ++i) {
        nb.points(i, 0) += rng.gaussian(0.0, c.noise_std);
        nb.points(i, 1) += rng.gaussian(0.0, c.noise_std);
      }
    }
  }

  apply_world_pose(s.target_history.points, world_angle, world_shift);
  apply_world_pose(s.future, world_angle, world_shift);
  for (VehicleTrack& nb : s.neighbor_histories) {
    apply_world_pose(nb.points, world_angle, world_shift);
  }
  for (MapPolyline& p : s.map_polylines) {
    apply_world_pose(p.points, world_angle, world_shift);
  }
  return s;
}

}  // namespace

std::string SyntheticConfig::to_json_text() const {
  json j;
  j["count"] = count;
  j["t_obs"] = t_obs;
  j["t_future"] = t_future;
  j["dt"] = dt;
  j["modes"] = modes;
  j["speed_min"] = speed_min;
  j["speed_max"] = speed_max;
  j["turn_radius"] = turn_radius;
  j["arm_length"] = arm_length;
  j["noise_std"] = noise_std;
  j["neighbors_min"] = neighbors_min;
  j["neighbors_max"] = neighbors_max;
  j["world_shift"] = world_shift;
  return j.dump();
}

SyntheticConfig SyntheticConfig::from_json_text(const std::string& text) {
  json j = json::parse(text);
  SyntheticConfig c;
  c.count = j.value("count", c.count);
  c.t_obs = j.value("t_obs", c.t_obs);
  c.t_future = j.value("t_future", c.t_future);
  c.dt = j.value("dt", c.dt);
  if (j.contains("modes")) c.modes = j["modes"].get<std::vector<std::string>>();
  c.speed_min = j.value("speed_min", c.speed_min);
  c.speed_max = j.value("speed_max", c.speed_max);
  c.turn_radius = j.value("turn_radius", c.turn_radius);
  c.arm_length = j.value("arm_length", c.arm_length);
  c.noise_std = j.value("noise_std", c.noise_std);
  c.neighbors_min = j.value("neighbors_min", c.neighbors_min);
  c.neighbors_max = j.value("neighbors_max", c.neighbors_max);
  c.world_shift = j.value("world_shift", c.world_shift);
  return c;
}

Dataset generate_synthetic_dataset(const SyntheticConfig& config,
                                   std::uint64_t seed,
                                   const std::string& split) {
  validate(config);
  Dataset d;
  d.split = split;
  d.seed = seed;
  d.config_snapshot = config.to_json_text();
  d.scenarios.reserve(static_cast<std::size_t>(config.count));
  for (int i = 0; i < config.count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    d.scenarios.push_back(generate_one(config, rng, i, split));
  }
  return d;
}

}  // namespace mmp
