// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusedflow/architecture.hpp"

#include <set>

#include "json.hpp"

namespace fusedflow {

using json = nlohmann::json;

int Architecture::level_index(std::string_view name) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i].name == name) return static_cast<int>(i);
  }
  throw UnknownNameError("unknown buffer level " + std::string(name));
}

namespace {

template <typename T>
T field(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + ": field \"" + key + "\" has the wrong type");
  }
}

}  // namespace

Architecture parse_architecture(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("architecture syntax error: ") + e.what(), static_cast<long>(e.byte));
  }
  if (!doc.is_object() || !doc.contains("levels") || !doc.at("levels").is_array()) {
    throw ParseError("architecture: missing array \"levels\"");
  }
  Architecture a;
  std::set<std::string> names;
  for (std::size_t i = 0; i < doc.at("levels").size(); ++i) {
    const auto& j = doc.at("levels")[i];
    std::string where = "levels[" + std::to_string(i) + "]";
    if (!j.is_object() || !j.contains("name")) throw ParseError(where + ": missing field \"name\"");
    BufferLevel l;
    l.name = field<std::string>(j, "name", "", where);
    if (!names.insert(l.name).second) throw ParseError(where + ": duplicate level name " + l.name);
    if (j.contains("capacity") && !j.at("capacity").is_null()) {
      l.capacity = field<Count>(j, "capacity", 0, where);
      if (*l.capacity <= 0) throw ParseError(where + ": capacity must be positive");
    }
    l.bandwidth = field<double>(j, "bandwidth", 1.0, where);
    if (l.bandwidth <= 0) throw ParseError(where + ": bandwidth must be positive");
    l.read_energy = field<double>(j, "read_energy", 0.0, where);
    l.write_energy = field<double>(j, "write_energy", 0.0, where);
    l.fanout = field<int>(j, "fanout", 1, where);
    if (l.fanout < 1) throw ParseError(where + ": fanout must be at least 1");
    l.hop_energy = field<double>(j, "hop_energy", 0.0, where);
    a.levels.push_back(std::move(l));
  }
  if (a.levels.empty()) throw ParseError("architecture: at least one level is required");
  if (doc.contains("compute")) {
    const auto& c = doc.at("compute");
    a.compute.units = field<int>(c, "units", 1, "compute");
    a.compute.ops_per_cycle_per_unit = field<int>(c, "ops_per_cycle_per_unit", 1, "compute");
    a.compute.op_energy = field<double>(c, "op_energy", 0.0, "compute");
    a.compute.pipeline_stages = field<int>(c, "pipeline_stages", 1, "compute");
    if (a.compute.units < 1 || a.compute.ops_per_cycle_per_unit < 1 || a.compute.pipeline_stages < 1) {
      throw ParseError("compute: units, ops_per_cycle_per_unit and pipeline_stages must be at least 1");
    }
  }
  return a;
}

std::string serialize_architecture(const Architecture& a) {
  json levels = json::array();
  for (const auto& l : a.levels) {
    json j{{"name", l.name},
           {"bandwidth", l.bandwidth},
           {"read_energy", l.read_energy},
           {"write_energy", l.write_energy},
           {"fanout", l.fanout},
           {"hop_energy", l.hop_energy}};
    if (l.capacity) j["capacity"] = *l.capacity;
    levels.push_back(j);
  }
  json compute{{"units", a.compute.units},
               {"ops_per_cycle_per_unit", a.compute.ops_per_cycle_per_unit},
               {"op_energy", a.compute.op_energy},
               {"pipeline_stages", a.compute.pipeline_stages}};
  return json{{"levels", levels}, {"compute", compute}}.dump(2);
}

}  // namespace fusedflow
