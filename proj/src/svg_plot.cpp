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

#include "mmp/svg_plot.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mmp {

namespace {

const char* kPalette[] = {"#e6194b", "#3cb44b", "#4363d8", "#f58231",
                          "#911eb4", "#46f0f0", "#f032e6", "#bcf60c",
                          "#fabebe", "#008080", "#e6beff", "#9a6324"};
constexpr int kPaletteSize = 12;

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_endpoint_plot(const std::vector<Forecast>& cases,
                                 const RegionPartition& partition,
                                 const ProposalRegionMap& pmap,
                                 const EndpointPlotConfig& cfg) {
  double extent = cfg.extent_m;
  for (const Forecast& f : cases) {
    for (int k = 0; k < f.proposals(); ++k) {
      const Vec2 e = f.endpoint(k);
      extent = std::max({extent, std::abs(e.x()), std::abs(e.y())});
    }
  }
  for (const auto& hull : partition.hulls) {
    for (const Vec2& v : hull) {
      extent = std::max({extent, std::abs(v.x()), std::abs(v.y())});
    }
  }
  extent *= 1.05;
  const double px = cfg.size_px;
  const double scale = px / (2.0 * extent);
  auto sx = [&](double x) { return (x + extent) * scale; };
  auto sy = [&](double y) { return (extent - y) * scale; };
  auto color = [&](int region) { return kPalette[region % kPaletteSize]; };

  std::ostringstream out;
  out.precision(6);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << cfg.size_px
      << "\" height=\"" << cfg.size_px << "\" viewBox=\"0 0 " << cfg.size_px
      << " " << cfg.size_px << "\">\n";
  if (!cfg.annotation.empty()) {
    out << "  <desc>" << xml_escape(cfg.annotation) << "</desc>\n";
  }
  out << "  <rect width=\"" << cfg.size_px << "\" height=\"" << cfg.size_px
      << "\" fill=\"white\"/>\n";
  // Axes through the origin of the normalized frame.
  out << "  <line x1=\"0\" y1=\"" << sy(0.0) << "\" x2=\"" << px << "\" y2=\""
      << sy(0.0) << "\" stroke=\"#cccccc\"/>\n";
  out << "  <line x1=\"" << sx(0.0) << "\" y1=\"0\" x2=\"" << sx(0.0)
      << "\" y2=\"" << px << "\" stroke=\"#cccccc\"/>\n";

  for (int r = 0; r < partition.M; ++r) {
    if (r < static_cast<int>(partition.hulls.size()) &&
        partition.hulls[r].size() >= 3) {
      out << "  <polygon class=\"region-" << r << " hull\" points=\"";
      for (const Vec2& v : partition.hulls[r]) {
        out << sx(v.x()) << "," << sy(v.y()) << " ";
      }
      out << "\" fill=\"" << color(r) << "\" fill-opacity=\"0.08\" stroke=\""
          << color(r) << "\" stroke-width=\"1\"/>\n";
    }
    if (r < static_cast<int>(partition.centroids.size())) {
      const Vec2& c = partition.centroids[r];
      out << "  <circle class=\"region-" << r << " centroid\" cx=\""
          << sx(c.x()) << "\" cy=\"" << sy(c.y()) << "\" r=\"5\" fill=\""
          << color(r) << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    }
  }

  for (const Forecast& f : cases) {
    if (f.proposals() != pmap.K) {
      throw ShapeError("plot: forecast proposal count does not match map");
    }
    const Eigen::VectorXd conf = f.confidences();
    const double uniform = 1.0 / f.proposals();
    for (int k = 0; k < f.proposals(); ++k) {
      if (conf(k) < uniform) continue;
      const Vec2 e = f.endpoint(k);
      const int region = pmap.region_of(k);
      out << "  <circle class=\"region-" << region << " endpoint\" cx=\""
          << sx(e.x()) << "\" cy=\"" << sy(e.y()) << "\" r=\"2.5\" fill=\""
          << color(region) << "\" fill-opacity=\"0.6\"/>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

void write_endpoint_plot(const std::string& path,
                         const std::vector<Forecast>& cases,
                         const RegionPartition& partition,
                         const ProposalRegionMap& pmap,
                         const EndpointPlotConfig& cfg) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    out << render_endpoint_plot(cases, partition, pmap, cfg);
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace mmp
