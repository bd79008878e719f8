// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusedflow/mapper.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <set>

#include "fusedflow/templates.hpp"
#include "json.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fusedflow::mapper {

using json = nlohmann::json;
using mapping::Mapping;
using mapping::Parallelism;

namespace {

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> output_ranks(const workload::Einsum& e) {
  std::vector<std::string> out;
  const auto red = e.reduction_ranks();
  for (const auto& r : e.op_ranks()) {
    if (std::find(red.begin(), red.end(), r) == red.end()) out.push_back(r);
  }
  return out;
}

/// Ordered selections of distinct ranks, shortest first.
std::vector<std::vector<std::string>> rank_orders(const std::vector<std::string>& ranks, int max_len) {
  std::vector<std::vector<std::string>> out{{}};
  std::vector<std::vector<std::string>> frontier{{}};
  for (int len = 1; len <= max_len; ++len) {
    std::vector<std::vector<std::string>> next;
    for (const auto& prefix : frontier) {
      for (const auto& r : ranks) {
        if (std::find(prefix.begin(), prefix.end(), r) != prefix.end()) continue;
        auto o = prefix;
        o.push_back(r);
        next.push_back(o);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

struct Choice {
  int depth;
  std::string level;
};

}  // namespace

MapspaceSpec parse_mapspace(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("mapspace syntax error: ") + e.what(), static_cast<long>(e.byte));
  }
  if (!doc.is_object()) throw ParseError("mapspace: expected an object");
  MapspaceSpec s;
  try {
    if (doc.contains("ranks")) {
      for (const auto& r : doc.at("ranks")) s.ranks.push_back(upper(r.get<std::string>()));
    }
    if (doc.contains("orders")) {
      s.orders.emplace();
      for (const auto& o : doc.at("orders")) {
        std::vector<std::string> order;
        for (const auto& r : o) order.push_back(upper(r.get<std::string>()));
        s.orders->push_back(std::move(order));
      }
    }
    if (doc.contains("max_partitions")) s.max_partitions = doc.at("max_partitions").get<int>();
    if (doc.contains("tile_sizes")) {
      const auto& t = doc.at("tile_sizes");
      if (t.is_array()) {
        s.ladder = TileLadder::List;
        s.tile_list = t.get<std::vector<Coord>>();
      } else if (t == "divisors") {
        s.ladder = TileLadder::Divisors;
      } else if (t == "pow2") {
        s.ladder = TileLadder::PowersOfTwo;
      } else {
        throw ParseError("mapspace: tile_sizes must be \"divisors\", \"pow2\" or a list");
      }
    }
    if (doc.contains("retention")) {
      auto r = doc.at("retention").get<std::string>();
      if (r == "per_tensor") s.mode = RetentionMode::PerTensor;
      else if (r == "uniform") s.mode = RetentionMode::Uniform;
      else throw ParseError("mapspace: retention must be \"per_tensor\" or \"uniform\"");
    }
    if (doc.contains("depths")) s.depths = doc.at("depths").get<std::vector<int>>();
    if (doc.contains("levels")) s.levels = doc.at("levels").get<std::vector<std::string>>();
    if (doc.contains("parallelism")) {
      s.parallelism.clear();
      for (const auto& p : doc.at("parallelism")) {
        auto name = p.get<std::string>();
        if (name == "sequential") s.parallelism.push_back(Parallelism::Sequential);
        else if (name == "pipeline") s.parallelism.push_back(Parallelism::Pipeline);
        else throw ParseError("mapspace: unknown parallelism \"" + name + "\"");
      }
    }
    if (doc.contains("intra")) s.intra = mapping::parse_mapping(json{{"intra", doc.at("intra")}}.dump()).intra;
    if (doc.contains("limit")) s.limit = doc.at("limit").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("mapspace: ") + e.what());
  }
  if (s.max_partitions < 0) throw ParseError("mapspace: max_partitions must be nonnegative");
  for (Coord t : s.tile_list) {
    if (t < 1) throw ParseError("mapspace: tile sizes must be positive");
  }
  return s;
}

std::string serialize_mapspace(const MapspaceSpec& s) {
  json doc = json::object();
  doc["ranks"] = s.ranks;
  if (s.orders) doc["orders"] = *s.orders;
  doc["max_partitions"] = s.max_partitions;
  if (s.ladder == TileLadder::List) doc["tile_sizes"] = s.tile_list;
  else doc["tile_sizes"] = s.ladder == TileLadder::Divisors ? "divisors" : "pow2";
  doc["retention"] = s.mode == RetentionMode::PerTensor ? "per_tensor" : "uniform";
  if (!s.depths.empty()) doc["depths"] = s.depths;
  if (!s.levels.empty()) doc["levels"] = s.levels;
  json par = json::array();
  for (auto p : s.parallelism) par.push_back(mapping::to_string(p));
  doc["parallelism"] = par;
  if (!s.intra.empty()) {
    Mapping m;
    m.intra = s.intra;
    doc["intra"] = json::parse(mapping::serialize_mapping(m)).at("intra");
  }
  doc["limit"] = s.limit;
  return doc.dump(2);
}

std::vector<Coord> tile_sizes(const MapspaceSpec& spec, Coord extent) {
  std::vector<Coord> out;
  switch (spec.ladder) {
    case TileLadder::Divisors:
      for (Coord d = 1; d <= extent; ++d) {
        if (extent % d == 0) out.push_back(d);
      }
      break;
    case TileLadder::PowersOfTwo:
      for (Coord d = 1; d < extent; d *= 2) out.push_back(d);
      out.push_back(extent);
      break;
    case TileLadder::List:
      for (Coord d : spec.tile_list) {
        if (d <= extent) out.push_back(d);
      }
      break;
  }
  return out;
}

void for_each_mapping(const MapspaceSpec& spec, const workload::FusionSet& w, const Architecture& a,
                      const std::function<void(const Mapping&)>& visit) {
  const auto& last = w.last();
  const auto ranks = spec.ranks.empty() ? output_ranks(last) : spec.ranks;
  for (const auto& r : ranks) {
    if (!last.has_op_rank(r)) throw UnknownNameError("mapspace rank " + r + " is not a rank of " + last.name);
  }
  const auto orders = spec.orders ? *spec.orders : rank_orders(ranks, spec.max_partitions);

  std::vector<int> levels;
  if (spec.levels.empty()) {
    for (int l = 1; l < static_cast<int>(a.levels.size()); ++l) levels.push_back(l);
  } else {
    for (const auto& name : spec.levels) levels.push_back(a.level_index(name));
  }
  const auto& tensors = w.tensors();
  std::size_t emitted = 0;

  for (const auto& order : orders) {
    const int n = static_cast<int>(order.size());
    std::vector<int> depths;
    for (int d = 0; d <= n; ++d) {
      if (spec.depths.empty() || std::find(spec.depths.begin(), spec.depths.end(), d) != spec.depths.end()) {
        depths.push_back(d);
      }
    }
    std::vector<std::vector<Coord>> ladders;
    for (const auto& r : order) ladders.push_back(tile_sizes(spec, last.shape(r)));

    // Retention assignments for this depth range, in odometer order.
    std::vector<std::vector<Choice>> assignments;
    if (spec.mode == RetentionMode::Uniform) {
      for (int l : levels) {
        if (l == 0) continue;
        for (int d : depths) assignments.push_back(std::vector<Choice>(tensors.size(), {d, a.level(l).name}));
      }
    } else {
      std::vector<std::vector<Choice>> per;
      for (const auto& t : tensors) {
        std::vector<Choice> c;
        for (int l : levels) {
          if (l == 0) {
            if (t.is_backed()) c.push_back({0, a.level(0).name});
            continue;
          }
          for (int d : depths) c.push_back({d, a.level(l).name});
        }
        per.push_back(std::move(c));
      }
      if (std::all_of(per.begin(), per.end(), [](const auto& c) { return !c.empty(); })) {
        std::vector<std::size_t> idx(per.size(), 0);
        while (true) {
          std::vector<Choice> as;
          for (std::size_t t = 0; t < per.size(); ++t) as.push_back(per[t][idx[t]]);
          assignments.push_back(std::move(as));
          std::size_t t = per.size();
          while (t > 0 && ++idx[t - 1] == per[t - 1].size()) idx[--t] = 0;
          if (t == 0) break;
        }
      }
    }

    std::vector<std::size_t> tix(order.size(), 0);
    if (std::any_of(ladders.begin(), ladders.end(), [](const auto& l) { return l.empty(); })) continue;
    while (true) {
      Mapping m;
      for (std::size_t j = 0; j < order.size(); ++j) m.partitions.push_back({order[j], ladders[j][tix[j]]});
      m.intra = spec.intra;
      for (auto par : spec.parallelism) {
        m.parallelism = par;
        for (const auto& as : assignments) {
          m.retention.clear();
          for (std::size_t t = 0; t < tensors.size(); ++t) {
            m.retention.push_back({tensors[t].name, as[t].depth, as[t].level});
          }
          if (!mapping::validate_mapping(m, w, a).empty()) continue;
          if (++emitted > spec.limit) {
            throw LimitExceededError("mapspace exceeds " + std::to_string(spec.limit) + " mappings");
          }
          visit(m);
        }
      }
      std::size_t j = order.size();
      while (j > 0 && ++tix[j - 1] == ladders[j - 1].size()) tix[--j] = 0;
      if (j == 0) break;
    }
  }
}

std::vector<Mapping> enumerate_mapspace(const MapspaceSpec& spec, const workload::FusionSet& w,
                                        const Architecture& a) {
  std::vector<Mapping> out;
  for_each_mapping(spec, w, a, [&](const Mapping& m) { out.push_back(m); });
  return out;
}

std::vector<Evaluated> evaluate_all_serial(const workload::FusionSet& w, const Architecture& a,
                                           const std::vector<Mapping>& mappings) {
  std::vector<Evaluated> out;
  out.reserve(mappings.size());
  for (const auto& m : mappings) out.push_back({m, metrics::evaluate(w, m, a)});
  return out;
}

std::vector<Evaluated> evaluate_all(const workload::FusionSet& w, const Architecture& a,
                                    const std::vector<Mapping>& mappings, int jobs) {
  std::vector<Evaluated> out(mappings.size());
  std::exception_ptr failure;
  const auto n = static_cast<long>(mappings.size());
#ifdef _OPENMP
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads)
#else
  (void)jobs;
#endif
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      out[k] = {mappings[k], metrics::evaluate(w, mappings[k], a)};
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical(fusedflow_mapper_failure)
#endif
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

Objective parse_objective(const std::string& name) {
  for (auto o : kAllObjectives) {
    if (name == to_string(o)) return o;
  }
  throw ParseError("unknown objective \"" + name + "\"");
}

const char* to_string(Objective o) {
  switch (o) {
    case Objective::Occupancy: return "occupancy";
    case Objective::Offchip: return "offchip";
    case Objective::Recompute: return "recompute";
    case Objective::Latency: return "latency";
    case Objective::Energy: return "energy";
  }
  return "?";
}

double objective_value(const metrics::Metrics& mt, Objective o) {
  switch (o) {
    case Objective::Occupancy: return static_cast<double>(mt.onchip_words);
    case Objective::Offchip: return static_cast<double>(mt.offchip_words);
    case Objective::Recompute: return static_cast<double>(mt.total_recompute);
    case Objective::Latency: return static_cast<double>(mt.latency_cycles);
    case Objective::Energy: return metrics::round_pj(mt.energy.total_pj);
  }
  return 0.0;
}

std::vector<std::size_t> pareto_filter(const std::vector<Point>& points) {
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (points[x].values != points[y].values) return points[x].values < points[y].values;
    return points[x].label < points[y].label;
  });
  // Sorted lexicographically, a dominating point always precedes the points
  // it dominates.
  std::vector<std::size_t> front;
  for (std::size_t i : order) {
    const auto& v = points[i].values;
    bool covered = false;
    for (std::size_t f : front) {
      const auto& u = points[f].values;
      bool le = true;
      for (std::size_t k = 0; k < v.size() && le; ++k) le = u[k] <= v[k];
      if (le) {
        covered = true;
        break;
      }
    }
    if (!covered) front.push_back(i);
  }
  return front;
}

std::string schedule_label(const Mapping& m) {
  if (m.partitions.empty()) return "untiled";
  std::string s;
  for (const auto& p : m.partitions) s += (s.empty() ? "" : ">") + p.rank;
  return s;
}

std::string partitions_label(const Mapping& m) {
  std::string s;
  for (const auto& p : m.partitions) s += (s.empty() ? "" : " ") + p.rank + ":" + std::to_string(p.tile_size);
  return s;
}

std::string retention_label(const Mapping& m) {
  std::string s;
  for (const auto& r : m.retention) {
    s += (s.empty() ? "" : " ") + r.tensor + "@" + r.level + ":" + std::to_string(r.depth);
  }
  return s;
}

std::vector<std::size_t> pareto_front(const std::vector<Evaluated>& results, const std::vector<Objective>& objectives) {
  std::vector<Point> pts;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (!r.metrics.feasible) continue;
    Point p;
    for (auto o : objectives) p.values.push_back(objective_value(r.metrics, o));
    p.label = schedule_label(r.mapping) + "|" + partitions_label(r.mapping) + "|" + retention_label(r.mapping) +
              "|" + mapping::to_string(r.mapping.parallelism);
    pts.push_back(std::move(p));
    index.push_back(i);
  }
  std::vector<std::size_t> out;
  for (std::size_t k : pareto_filter(pts)) out.push_back(index[k]);
  return out;
}

CsvRow make_row(const std::string& study, const std::string& schedule, const Evaluated& r, const Architecture& a) {
  CsvRow row;
  row.study = study;
  row.schedule = schedule;
  row.partitions = partitions_label(r.mapping);
  row.retention = retention_label(r.mapping);
  row.parallelism = mapping::to_string(r.mapping.parallelism);
  const auto& mt = r.metrics;
  row.occupancy_words = mt.onchip_words;
  row.offchip_words = mt.offchip_words;
  row.recompute_ops = mt.total_recompute;
  row.latency_cycles = mt.latency_cycles;
  row.energy_pj = mt.energy.total_pj;
  json b = json::object();
  for (std::size_t l = 1; l < a.levels.size(); ++l) {
    json lv = json::object();
    for (const auto& [t, v] : mt.occupancy.per_tensor[l]) lv[t] = v;
    b[a.levels[l].name] = lv;
  }
  row.breakdown_json = b.dump();
  return row;
}

std::string csv_header() {
  return "study,schedule,partitions,retention,parallelism,occupancy_words,offchip_words,recompute_ops,"
         "latency_cycles,energy_pj,breakdown_json\n";
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string csv_rows(const std::vector<CsvRow>& rows) {
  std::string out;
  char energy[64];
  for (const auto& r : rows) {
    std::snprintf(energy, sizeof energy, "%.3f", metrics::round_pj(r.energy_pj));
    out += csv_field(r.study) + "," + csv_field(r.schedule) + "," + csv_field(r.partitions) + "," +
           csv_field(r.retention) + "," + csv_field(r.parallelism) + "," + std::to_string(r.occupancy_words) + "," +
           std::to_string(r.offchip_words) + "," + std::to_string(r.recompute_ops) + "," +
           std::to_string(r.latency_cycles) + "," + energy + "," + csv_field(r.breakdown_json) + "\n";
  }
  return out;
}

std::optional<Count> best_offchip_within(const std::vector<Evaluated>& results, Count budget) {
  std::optional<Count> best;
  for (const auto& r : results) {
    if (!r.metrics.feasible || r.metrics.onchip_words > budget) continue;
    if (!best || r.metrics.offchip_words < *best) best = r.metrics.offchip_words;
  }
  return best;
}

std::vector<workload::FusionSet> split_layers(const workload::FusionSet& w) {
  std::vector<workload::FusionSet> out;
  for (const auto& e : w.einsums()) out.emplace_back(std::vector<workload::Einsum>{e});
  return out;
}

}  // namespace fusedflow::mapper
