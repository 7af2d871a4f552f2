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

#include "mmp/dataset_io.hpp"

#include <filesystem>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

namespace mmp {

namespace {

using json = nlohmann::json;

json points_to_json(const Points& pts) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    arr.push_back({pts(i, 0), pts(i, 1)});
  }
  return arr;
}

Points points_from_json(const json& arr, const std::string& field,
                        int line_number) {
  if (!arr.is_array()) {
    throw SchemaError("line " + std::to_string(line_number) + ": field '" +
                      field + "' must be an array of [x,y] pairs");
  }
  Points pts(static_cast<Eigen::Index>(arr.size()), 2);
  Eigen::Index i = 0;
  for (const json& p : arr) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() ||
        !p[1].is_number()) {
      throw SchemaError("line " + std::to_string(line_number) + ": field '" +
                        field + "' entry " + std::to_string(i) +
                        " is not an [x,y] pair");
    }
    pts(i, 0) = p[0].get<double>();
    pts(i, 1) = p[1].get<double>();
    ++i;
  }
  return pts;
}

const json& require_field(const json& obj, const char* field,
                          int line_number) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw SchemaError("line " + std::to_string(line_number) +
                      ": missing required field '" + field + "'");
  }
  return *it;
}

}  // namespace

std::string scenario_to_json_line(const Scenario& s) {
  json j;
  j["id"] = s.id;
  j["target_history"] = points_to_json(s.target_history.points);
  json neighbors = json::array();
  for (const VehicleTrack& n : s.neighbor_histories) {
    json rec;
    rec["points"] = points_to_json(n.points);
    rec["valid"] = n.valid;
    neighbors.push_back(std::move(rec));
  }
  j["neighbor_histories"] = std::move(neighbors);
  json polylines = json::array();
  for (const MapPolyline& p : s.map_polylines) {
    json rec;
    rec["points"] = points_to_json(p.points);
    rec["tag"] = p.tag;
    polylines.push_back(std::move(rec));
  }
  j["map_polylines"] = std::move(polylines);
  if (s.has_future()) j["future"] = points_to_json(s.future);
  if (s.mode_label >= 0) j["mode_label"] = s.mode_label;
  return j.dump();
}

Scenario scenario_from_json_line(const std::string& line, int line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError("line " + std::to_string(line_number) +
                     ": malformed JSON (" + std::string(e.what()) + ")");
  }
  if (!j.is_object()) {
    throw ParseError("line " + std::to_string(line_number) +
                     ": record is not a JSON object");
  }
  Scenario s;
  const json& id = require_field(j, "id", line_number);
  if (!id.is_string()) {
    throw SchemaError("line " + std::to_string(line_number) +
                      ": field 'id' must be a string");
  }
  s.id = id.get<std::string>();
  s.target_history.points = points_from_json(
      require_field(j, "target_history", line_number), "target_history",
      line_number);
  s.target_history.valid.assign(
      static_cast<std::size_t>(s.target_history.points.rows()), 1);
  const json& neighbors = require_field(j, "neighbor_histories", line_number);
  if (!neighbors.is_array()) {
    throw SchemaError("line " + std::to_string(line_number) +
                      ": field 'neighbor_histories' must be an array");
  }
  for (const json& n : neighbors) {
    VehicleTrack track;
    track.points =
        points_from_json(require_field(n, "points", line_number), "points",
                         line_number);
    const json& valid = require_field(n, "valid", line_number);
    if (!valid.is_array() ||
        valid.size() != static_cast<std::size_t>(track.points.rows())) {
      throw SchemaError("line " + std::to_string(line_number) +
                        ": field 'valid' must match the points length");
    }
    track.valid.clear();
    for (const json& v : valid) {
      track.valid.push_back(v.get<int>() != 0 ? 1 : 0);
    }
    s.neighbor_histories.push_back(std::move(track));
  }
  const json& polylines = require_field(j, "map_polylines", line_number);
  if (!polylines.is_array()) {
    throw SchemaError("line " + std::to_string(line_number) +
                      ": field 'map_polylines' must be an array");
  }
  for (const json& p : polylines) {
    MapPolyline poly;
    poly.points =
        points_from_json(require_field(p, "points", line_number), "points",
                         line_number);
    poly.tag = require_field(p, "tag", line_number).get<std::string>();
    s.map_polylines.push_back(std::move(poly));
  }
  if (j.contains("future")) {
    s.future = points_from_json(j["future"], "future", line_number);
  } else {
    s.future.resize(0, 2);
  }
  s.mode_label = j.value("mode_label", -1);
  return s;
}

void write_dataset(const std::string& path, const Dataset& dataset) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    json meta;
    meta["meta"]["seed"] = dataset.seed;
    meta["meta"]["split"] = dataset.split;
    meta["meta"]["config"] = json::parse(dataset.config_snapshot);
    out << meta.dump() << "\n";
    for (const Scenario& s : dataset.scenarios) {
      out << scenario_to_json_line(s) << "\n";
    }
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  Dataset d;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    if (line_number == 1) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ParseError("line 1: malformed JSON (" + std::string(e.what()) +
                         ")");
      }
      if (j.is_object() && j.contains("meta")) {
        const json& meta = j["meta"];
        d.seed = meta.value("seed", std::uint64_t{0});
        d.split = meta.value("split", std::string("train"));
        if (meta.contains("config")) d.config_snapshot = meta["config"].dump();
        continue;
      }
    }
    Scenario s = scenario_from_json_line(line, line_number);
    if (!seen_ids.insert(s.id).second) {
      throw SchemaError("line " + std::to_string(line_number) +
                        ": duplicate scenario id '" + s.id + "'");
    }
    d.scenarios.push_back(std::move(s));
  }
  return d;
}

}  // namespace mmp
