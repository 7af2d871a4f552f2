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

// Spatial partition of the normalized endpoint plane into M regions, fit
// either by balanced K-means over training endpoints or as equal-angle fan
// sectors. Region membership is total over the plane: nearest centroid for
// K-means (hulls are kept for plotting only) and sector angle for fans.

#pragma once

#include <string>
#include <vector>

#include "mmp/common.hpp"
#include "mmp/geometry.hpp"

namespace mmp {

struct RegionPartition {
  int M = 1;
  std::string method = "kmeans";  // "kmeans" | "fan"
  std::vector<Vec2> centroids;    // M entries
  std::vector<std::vector<Vec2>> hulls;  // M convex polygons, plot-only
  std::uint64_t seed = 0;
  std::string config_snapshot = "{}";

  // Region of an endpoint. Ties (equidistant centroids, sector boundaries)
  // resolve to the lowest region index.
  int assign(const Vec2& endpoint) const;

  std::string to_json_text() const;
  static RegionPartition from_json_text(const std::string& text);
};

struct KMeansResult {
  std::vector<int> assignment;  // point index -> cluster
  std::vector<Vec2> centroids;
  int iterations = 0;
};

// Balanced K-means: cluster sizes differ by at most one. Each round sorts
// points by how much they prefer their best cluster over the runner-up and
// greedily assigns them to the nearest cluster with remaining capacity.
KMeansResult constrained_kmeans(const std::vector<Vec2>& points, int M,
                                std::uint64_t seed, int max_iterations = 100);

RegionPartition build_region_partition(const std::vector<Vec2>& points,
                                       const KMeansResult& clusters);

RegionPartition manual_fan_partition(int M);

// Fits a K-means partition on the normalized ground-truth endpoints of a
// training split (convenience wrapper used by the pipeline).
RegionPartition fit_partition(const std::vector<Vec2>& endpoints, int M,
                              std::uint64_t seed);

struct ProposalRegionMap {
  int K = 0;
  int M = 1;
  int per_region = 0;  // N = K / M

  int region_of(int proposal) const { return proposal / per_region; }
  int first_proposal(int region) const { return region * per_region; }
};

// Proposals [i*N, (i+1)*N) belong to region i. K must be divisible by M.
ProposalRegionMap map_proposals_to_regions(int K, int M);

void write_partition(const std::string& path, const RegionPartition& p);
RegionPartition read_partition(const std::string& path);

}  // namespace mmp
