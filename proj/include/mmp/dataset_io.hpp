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

// Dataset persistence: one JSON object per line. An optional leading meta
// line records the generator seed, split and config snapshot. Coordinates
// are written with shortest round-trip formatting, so write/read is
// bit-exact.

#pragma once

#include <string>

#include "mmp/scenario.hpp"

namespace mmp {

void write_dataset(const std::string& path, const Dataset& dataset);

// Throws ParseError (with the line number) on malformed JSON and SchemaError
// (naming the field) on missing or mistyped fields. An empty file is an
// empty dataset.
Dataset read_dataset(const std::string& path);

// Serialization of one scenario record (exposed for tests).
std::string scenario_to_json_line(const Scenario& s);
Scenario scenario_from_json_line(const std::string& line, int line_number);

}  // namespace mmp
