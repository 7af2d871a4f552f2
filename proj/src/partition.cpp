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

#include "mmp/partition.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace mmp {

namespace {

using json = nlohmann::json;

// k-means++ seeding: first centroid uniform, then proportional to squared
// distance from the nearest chosen centroid.
std::vector<Vec2> seed_centroids(const std::vector<Vec2>& pts, int M,
                                 Rng& rng) {
  std::vector<Vec2> centroids;
  centroids.push_back(pts[rng.uniform_int(pts.size())]);
  std::vector<double> d2(pts.size());
  while (static_cast<int>(centroids.size()) < M) {
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec2& c : centroids) {
        best = std::min(best, (pts[i] - c).squaredNorm());
      }
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      // All remaining points coincide with chosen centroids; pick uniformly.
      centroids.push_back(pts[rng.uniform_int(pts.size())]);
      continue;
    }
    double r = rng.uniform() * total;
    std::size_t pick = pts.size() - 1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      r -= d2[i];
      if (r <= 0.0) {
        pick = i;
        break;
      }
    }
    centroids.push_back(pts[pick]);
  }
  return centroids;
}

// One balanced assignment round. Every cluster holds floor(n/M) points and
// n % M clusters may take one extra, first come first served.
std::vector<int> balanced_assign(const std::vector<Vec2>& pts,
                                 const std::vector<Vec2>& centroids) {
  const int n = static_cast<int>(pts.size());
  const int M = static_cast<int>(centroids.size());
  const int base = n / M;
  int extra_slots = n % M;

  struct Pref {
    int point;
    double gap;  // runner-up distance minus best distance
  };
  std::vector<Pref> order(pts.size());
  std::vector<std::vector<double>> dist(pts.size(),
                                        std::vector<double>(centroids.size()));
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    for (int c = 0; c < M; ++c) {
      dist[i][c] = (pts[i] - centroids[c]).norm();
      if (dist[i][c] < best) {
        second = best;
        best = dist[i][c];
      } else if (dist[i][c] < second) {
        second = dist[i][c];
      }
    }
    order[i] = {i, M > 1 ? second - best : 0.0};
  }
  std::sort(order.begin(), order.end(), [](const Pref& a, const Pref& b) {
    return a.gap > b.gap || (a.gap == b.gap && a.point < b.point);
  });

  std::vector<int> count(centroids.size(), 0);
  std::vector<int> assignment(pts.size(), -1);
  for (const Pref& pr : order) {
    int chosen = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < M; ++c) {
      const bool open =
          count[c] < base || (count[c] == base && extra_slots > 0);
      if (open && dist[pr.point][c] < best) {
        best = dist[pr.point][c];
        chosen = c;
      }
    }
    if (count[chosen] == base) --extra_slots;
    ++count[chosen];
    assignment[pr.point] = chosen;
  }
  return assignment;
}

double wrap_angle(double a) {
  const double two_pi = 2.0 * M_PI;
  a = std::fmod(a, two_pi);
  if (a < 0.0) a += two_pi;
  return a;
}

json vec2_to_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec2 vec2_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) {
    throw SchemaError("partition file: expected [x,y] pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

KMeansResult constrained_kmeans(const std::vector<Vec2>& points, int M,
                                std::uint64_t seed, int max_iterations) {
  if (M < 1) throw ConfigError("cluster count must be >= 1");
  if (static_cast<int>(points.size()) < M) {
    throw ConfigError("cannot split " + std::to_string(points.size()) +
                      " points into " + std::to_string(M) + " clusters");
  }
  Rng rng(seed);
  KMeansResult res;
  res.centroids = seed_centroids(points, M, rng);
  res.assignment.assign(points.size(), -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    std::vector<int> next = balanced_assign(points, res.centroids);
    res.iterations = iter + 1;
    const bool stable = next == res.assignment;
    res.assignment = std::move(next);
    std::vector<Vec2> sums(static_cast<std::size_t>(M), Vec2::Zero());
    std::vector<int> counts(static_cast<std::size_t>(M), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      sums[res.assignment[i]] += points[i];
      ++counts[res.assignment[i]];
    }
    for (int c = 0; c < M; ++c) {
      if (counts[c] > 0) res.centroids[c] = sums[c] / counts[c];
    }
    if (stable) break;
  }
  return res;
}

RegionPartition build_region_partition(const std::vector<Vec2>& points,
                                       const KMeansResult& clusters) {
  if (clusters.centroids.empty()) throw ConfigError("no clusters to build from");
  RegionPartition p;
  p.M = static_cast<int>(clusters.centroids.size());
  p.method = "kmeans";
  p.centroids = clusters.centroids;
  p.hulls.resize(p.M);
  std::vector<std::vector<Vec2>> members(p.M);
  for (std::size_t i = 0; i < points.size(); ++i) {
    members[clusters.assignment[i]].push_back(points[i]);
  }
  for (int c = 0; c < p.M; ++c) {
    p.hulls[c] = convex_hull(members[c]);
  }
  return p;
}

RegionPartition manual_fan_partition(int M) {
  if (M < 1) throw ConfigError("fan partition needs M >= 1");
  RegionPartition p;
  p.M = M;
  p.method = "fan";
  const double w = 2.0 * M_PI / M;
  const double r = 20.0;  // plotting radius for sector outlines
  for (int i = 0; i < M; ++i) {
    // Sector i is centered at compass angle i*w (0 = +y, clockwise).
    const double center = i * w;
    p.centroids.push_back(
        {0.5 * r * std::sin(center), 0.5 * r * std::cos(center)});
    std::vector<Vec2> outline;
    outline.push_back(Vec2::Zero());
    const int arc_steps = 8;
    for (int k = 0; k <= arc_steps; ++k) {
      const double a = center - w / 2.0 + w * k / arc_steps;
      outline.push_back({r * std::sin(a), r * std::cos(a)});
    }
    p.hulls.push_back(std::move(outline));
  }
  return p;
}

int RegionPartition::assign(const Vec2& endpoint) const {
  if (method == "fan") {
    if (M == 1) return 0;
    const double w = 2.0 * M_PI / M;
    // Compass angle: 0 on +y, growing clockwise, so sector boundaries sit at
    // half-widths around each sector center.
    const double phi = wrap_angle(std::atan2(endpoint.x(), endpoint.y()));
    const double u = wrap_angle(phi + w / 2.0);
    if (u == 0.0) return 0;
    const int idx = static_cast<int>(std::ceil(u / w)) - 1;
    return std::min(idx, M - 1);
  }
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < M; ++c) {
    const double d = (endpoint - centroids[c]).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

RegionPartition fit_partition(const std::vector<Vec2>& endpoints, int M,
                              std::uint64_t seed) {
  KMeansResult clusters = constrained_kmeans(endpoints, M, seed);
  RegionPartition p = build_region_partition(endpoints, clusters);
  p.seed = seed;
  json cfg;
  cfg["M"] = M;
  cfg["points"] = endpoints.size();
  p.config_snapshot = cfg.dump();
  return p;
}

ProposalRegionMap map_proposals_to_regions(int K, int M) {
  if (M < 1 || K < 1) throw ConfigError("K and M must be >= 1");
  if (K % M != 0) {
    throw ConfigError("proposal count " + std::to_string(K) +
                      " is not divisible by region count " + std::to_string(M));
  }
  return {K, M, K / M};
}

std::string RegionPartition::to_json_text() const {
  json j;
  j["method"] = method;
  j["M"] = M;
  j["seed"] = seed;
  j["config"] = json::parse(config_snapshot);
  json cents = json::array();
  for (const Vec2& c : centroids) cents.push_back(vec2_to_json(c));
  j["centroids"] = std::move(cents);
  json hull_arr = json::array();
  for (const auto& hull : hulls) {
    json h = json::array();
    for (const Vec2& v : hull) h.push_back(vec2_to_json(v));
    hull_arr.push_back(std::move(h));
  }
  j["hulls"] = std::move(hull_arr);
  return j.dump(2);
}

RegionPartition RegionPartition::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("partition file: malformed JSON (" + std::string(e.what()) +
                     ")");
  }
  RegionPartition p;
  if (!j.contains("method") || !j.contains("M") || !j.contains("centroids")) {
    throw SchemaError("partition file: missing method, M or centroids");
  }
  p.method = j["method"].get<std::string>();
  if (p.method != "kmeans" && p.method != "fan") {
    throw SchemaError("partition file: unknown method '" + p.method + "'");
  }
  p.M = j["M"].get<int>();
  p.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("config")) p.config_snapshot = j["config"].dump();
  for (const json& c : j["centroids"]) p.centroids.push_back(vec2_from_json(c));
  if (static_cast<int>(p.centroids.size()) != p.M) {
    throw SchemaError("partition file: centroid count does not match M");
  }
  if (j.contains("hulls")) {
    for (const json& h : j["hulls"]) {
      std::vector<Vec2> hull;
      for (const json& v : h) hull.push_back(vec2_from_json(v));
      p.hulls.push_back(std::move(hull));
    }
  }
  return p;
}

void write_partition(const std::string& path, const RegionPartition& p) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    out << p.to_json_text() << "\n";
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

RegionPartition read_partition(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return RegionPartition::from_json_text(text);
}

}  // namespace mmp
