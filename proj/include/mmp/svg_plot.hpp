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

// SVG scatter of predicted endpoints in the normalized frame, colored by
// the proposal's region, with region hulls and centroids overlaid.
// Endpoints whose softmax confidence falls strictly below uniform (1/K) are
// filtered out.

#pragma once

#include <string>
#include <vector>

#include "mmp/metrics.hpp"

namespace mmp {

struct EndpointPlotConfig {
  double extent_m = 40.0;     // plotted half-range when data fits inside
  int size_px = 720;
  std::string annotation;     // embedded as the SVG <desc> payload
};

std::string render_endpoint_plot(const std::vector<Forecast>& cases,
                                 const RegionPartition& partition,
                                 const ProposalRegionMap& pmap,
                                 const EndpointPlotConfig& cfg = {});

void write_endpoint_plot(const std::string& path,
                         const std::vector<Forecast>& cases,
                         const RegionPartition& partition,
                         const ProposalRegionMap& pmap,
                         const EndpointPlotConfig& cfg = {});

}  // namespace mmp
