// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusedflow/mapping.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fusedflow::mapping {

using json = nlohmann::json;

const char* to_string(Parallelism p) { return p == Parallelism::Pipeline ? "pipeline" : "sequential"; }

const RetentionChoice& Mapping::retention_of(const std::string& tensor) const {
  for (const auto& r : retention) {
    if (r.tensor == tensor) return r;
  }
  throw UnknownNameError("no retention choice for tensor " + tensor);
}

namespace {

RankId upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(where + ": missing field \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + ": field \"" + key + "\" has the wrong type");
  }
}

}  // namespace

Mapping parse_mapping(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("mapping syntax error: ") + e.what(), static_cast<long>(e.byte));
  }
  if (!doc.is_object()) throw ParseError("mapping: expected an object");
  Mapping m;
  if (doc.contains("partitions")) {
    const auto& ps = doc.at("partitions");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      std::string where = "partitions[" + std::to_string(i) + "]";
      m.partitions.push_back({upper(get<std::string>(ps[i], "rank", where)), get<Coord>(ps[i], "tile_size", where)});
    }
  }
  if (doc.contains("parallelism")) {
    auto p = get<std::string>(doc, "parallelism", "mapping");
    if (p == "sequential") m.parallelism = Parallelism::Sequential;
    else if (p == "pipeline") m.parallelism = Parallelism::Pipeline;
    else throw ParseError("mapping: parallelism must be \"sequential\" or \"pipeline\", got \"" + p + "\"");
  }
  if (doc.contains("retention")) {
    const auto& rs = doc.at("retention");
    for (std::size_t i = 0; i < rs.size(); ++i) {
      std::string where = "retention[" + std::to_string(i) + "]";
      m.retention.push_back({get<std::string>(rs[i], "tensor", where), get<int>(rs[i], "depth", where),
                             get<std::string>(rs[i], "level", where)});
    }
  }
  if (doc.contains("intra")) {
    for (const auto& [einsum, loops] : doc.at("intra").items()) {
      auto& nest = m.intra[einsum];
      for (std::size_t i = 0; i < loops.size(); ++i) {
        std::string where = "intra." + einsum + "[" + std::to_string(i) + "]";
        IntraLoop l;
        l.rank = upper(get<std::string>(loops[i], "rank", where));
        l.tile_size = get<Coord>(loops[i], "tile_size", where);
        auto kind = loops[i].contains("kind") ? get<std::string>(loops[i], "kind", where) : "temporal";
        if (kind == "temporal") l.kind = LoopKind::Temporal;
        else if (kind == "spatial") l.kind = LoopKind::Spatial;
        else throw ParseError(where + ": kind must be \"temporal\" or \"spatial\"");
        l.level = get<std::string>(loops[i], "level", where);
        nest.push_back(std::move(l));
      }
    }
  }
  return m;
}

std::string serialize_mapping(const Mapping& m) {
  json ps = json::array();
  for (const auto& p : m.partitions) ps.push_back({{"rank", p.rank}, {"tile_size", p.tile_size}});
  json rs = json::array();
  for (const auto& r : m.retention) rs.push_back({{"tensor", r.tensor}, {"depth", r.depth}, {"level", r.level}});
  json intra = json::object();
  for (const auto& [einsum, loops] : m.intra) {
    json arr = json::array();
    for (const auto& l : loops) {
      arr.push_back({{"rank", l.rank},
                     {"tile_size", l.tile_size},
                     {"kind", l.kind == LoopKind::Spatial ? "spatial" : "temporal"},
                     {"level", l.level}});
    }
    intra[einsum] = arr;
  }
  return json{{"partitions", ps}, {"parallelism", to_string(m.parallelism)}, {"retention", rs}, {"intra", intra}}
      .dump(2);
}

namespace {

void check_nest(const Mapping& m, const workload::Einsum& e, const Architecture& a, std::vector<std::string>& out) {
  auto it = m.intra.find(e.name);
  if (it == m.intra.end()) return;
  const int K = a.innermost();
  int prev_level = 1;
  std::set<RankId> spatial;
  std::map<RankId, Coord> size;
  Coord units = 1;
  for (std::size_t i = 0; i < it->second.size(); ++i) {
    const auto& l = it->second[i];
    std::string where = "intra." + e.name + "[" + std::to_string(i) + "]";
    if (!e.has_op_rank(l.rank)) {
      out.push_back(where + ": rank " + l.rank + " is not a rank of " + e.name);
      continue;
    }
    if (l.tile_size < 1) out.push_back(where + ": tile_size must be at least 1");
    int level = -1;
    try {
      level = a.level_index(l.level);
    } catch (const UnknownNameError&) {
      out.push_back(where + ": unknown level " + l.level);
      continue;
    }
    if (level < 1) out.push_back(where + ": loops must be placed at an on-chip level");
    if (level < prev_level) out.push_back(where + ": loop levels must not move outward going inward");
    prev_level = std::max(prev_level, level);
    Coord parent = size.count(l.rank) ? size[l.rank] : e.shape(l.rank);
    if (l.kind == LoopKind::Spatial) {
      if (level != K) out.push_back(where + ": spatial loops are only supported at the innermost level");
      if (!spatial.insert(l.rank).second) out.push_back(where + ": at most one spatial loop per rank");
      if (l.tile_size >= 1) units *= ceil_div(parent, l.tile_size);
    }
    if (l.tile_size >= 1) size[l.rank] = l.tile_size;
  }
  if (a.innermost() >= 1 && units > a.level(K).fanout) {
    out.push_back("intra." + e.name + ": spatial loops need " + std::to_string(units) + " units but level " +
                  a.level(K).name + " has fanout " + std::to_string(a.level(K).fanout));
  }
  if (units > a.compute.units) {
    out.push_back("intra." + e.name + ": spatial loops need " + std::to_string(units) + " units but compute has " +
                  std::to_string(a.compute.units));
  }
}

}  // namespace

std::vector<std::string> validate_mapping(const Mapping& m, const workload::FusionSet& w, const Architecture& a) {
  std::vector<std::string> out;
  const auto& last = w.last();
  std::map<RankId, Coord> prev;
  for (std::size_t i = 0; i < m.partitions.size(); ++i) {
    const auto& p = m.partitions[i];
    std::string where = "partitions[" + std::to_string(i) + "]";
    if (!last.has_op_rank(p.rank)) {
      out.push_back(where + ": rank " + p.rank + " is not a rank of the last einsum " + last.name);
      continue;
    }
    if (p.tile_size < 1 || p.tile_size > last.shape(p.rank)) {
      out.push_back(where + ": tile_size " + std::to_string(p.tile_size) + " must lie in [1, " +
                    std::to_string(last.shape(p.rank)) + "]");
    }
    auto it = prev.find(p.rank);
    if (it != prev.end() && p.tile_size >= it->second) {
      out.push_back(where + ": repeated partitions of " + p.rank + " need strictly decreasing tile sizes");
    }
    prev[p.rank] = p.tile_size;
  }

  std::set<std::string> seen;
  for (std::size_t i = 0; i < m.retention.size(); ++i) {
    const auto& r = m.retention[i];
    std::string where = "retention[" + std::to_string(i) + "]";
    if (!w.has_tensor(r.tensor)) {
      out.push_back(where + ": unknown tensor " + r.tensor);
      continue;
    }
    if (!seen.insert(r.tensor).second) out.push_back(where + ": tensor " + r.tensor + " has more than one choice");
    if (r.depth < 0 || r.depth > static_cast<int>(m.partitions.size())) {
      out.push_back(where + ": depth " + std::to_string(r.depth) + " must lie in [0, " +
                    std::to_string(m.partitions.size()) + "]");
    }
    int level = -1;
    try {
      level = a.level_index(r.level);
    } catch (const UnknownNameError&) {
      out.push_back(where + ": unknown level " + r.level);
      continue;
    }
    if (level == 0 && w.tensor(r.tensor).role == workload::TensorRole::Intermediate) {
      out.push_back(where + ": intermediate " + r.tensor +
                    " is retained off-chip, but intermediates exist only on-chip");
    }
  }
  for (const auto& t : w.tensors()) {
    if (!seen.count(t.name)) out.push_back("retention: tensor " + t.name + " has no retention choice");
  }

  for (const auto& [name, loops] : m.intra) {
    if (w.einsum_index(name) < 0) out.push_back("intra: unknown einsum " + name);
  }
  Coord total_units = 0;
  for (const auto& e : w.einsums()) {
    check_nest(m, e, a, out);
    if (out.empty()) total_units += spatial_units(effective_nest(m, e, a));
  }
  if (m.parallelism == Parallelism::Pipeline) {
    if (static_cast<int>(w.size()) > a.compute.pipeline_stages) {
      out.push_back("parallelism: pipeline needs " + std::to_string(w.size()) + " stages but compute supports " +
                    std::to_string(a.compute.pipeline_stages));
    }
    if (out.empty() && total_units > a.compute.units) {
      out.push_back("parallelism: pipelined layers need " + std::to_string(total_units) +
                    " units in total but compute has " + std::to_string(a.compute.units));
    }
  }
  return out;
}

void require_valid(const Mapping& m, const workload::FusionSet& w, const Architecture& a) {
  auto v = validate_mapping(m, w, a);
  if (v.empty()) return;
  std::ostringstream msg;
  msg << "invalid mapping:";
  for (const auto& s : v) msg << "\n  " << s;
  throw InvalidMappingError(msg.str());
}

std::vector<Coord> partition_trips(const Mapping& m, const workload::FusionSet& w) {
  std::vector<Coord> trips;
  std::map<RankId, Coord> size;
  for (const auto& p : m.partitions) {
    Coord parent = size.count(p.rank) ? size[p.rank] : w.last().shape(p.rank);
    trips.push_back(ceil_div(parent, p.tile_size));
    size[p.rank] = p.tile_size;
  }
  return trips;
}

geometry::Region partition_tile(const Mapping& m, const workload::FusionSet& w, std::span<const Coord> coord,
                                std::size_t depth) {
  const auto& last = w.last();
  auto ranks = last.op_ranks();
  geometry::Box b;
  for (const auto& r : ranks) b.dims.push_back(geometry::StridedInterval::make(0, last.shape(r) - 1));
  for (std::size_t j = 0; j < depth; ++j) {
    const auto& p = m.partitions[j];
    auto k = static_cast<std::size_t>(std::find(ranks.begin(), ranks.end(), p.rank) - ranks.begin());
    auto& iv = b.dims[k];
    Coord lo = iv.lo + coord[j] * p.tile_size;
    if (lo > iv.hi) return geometry::Region(ranks);
    iv = geometry::StridedInterval::make(lo, std::min(iv.hi, lo + p.tile_size - 1));
  }
  return geometry::Region::of_box(ranks, b);
}

std::vector<std::vector<Coord>> iteration_space(const Mapping& m, const workload::FusionSet& w) {
  auto trips = partition_trips(m, w);
  std::vector<std::vector<Coord>> out;
  std::vector<Coord> c(trips.size(), 0);
  while (true) {
    if (!partition_tile(m, w, c, c.size()).empty()) out.push_back(c);
    std::size_t k = c.size();
    while (k > 0) {
      --k;
      if (++c[k] < trips[k]) break;
      c[k] = 0;
      if (k == 0) return out;
    }
    if (c.empty()) return out;
  }
}

std::vector<NestLoop> effective_nest(const Mapping& m, const workload::Einsum& e, const Architecture& a) {
  std::vector<NestLoop> nest;
  const int K = a.innermost();
  std::map<RankId, Coord> size;
  auto it = m.intra.find(e.name);
  if (it != m.intra.end()) {
    for (const auto& l : it->second) {
      NestLoop n{l.rank, l.tile_size, l.kind, a.level_index(l.level), 1};
      Coord parent = size.count(l.rank) ? size[l.rank] : e.shape(l.rank);
      if (l.kind == LoopKind::Spatial) n.radix = ceil_div(parent, l.tile_size);
      size[l.rank] = l.tile_size;
      nest.push_back(std::move(n));
    }
  }
  for (const auto& r : e.op_ranks()) nest.push_back({r, 1, LoopKind::Temporal, K, 1});
  return nest;
}

Coord spatial_units(const std::vector<NestLoop>& nest) {
  Coord u = 1;
  for (const auto& l : nest) u *= l.radix;
  return u;
}

}  // namespace fusedflow::mapping
