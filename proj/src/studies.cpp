// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

// Canned mapspace searches over the fusion-set templates.

#include <algorithm>
#include <set>

#include "fusedflow/mapper.hpp"
#include "fusedflow/templates.hpp"

namespace fusedflow::mapper {

namespace {

using Group = std::function<std::string(const Evaluated&)>;

MapspaceSpec tiled(int max_partitions, RetentionMode mode) {
  MapspaceSpec s;
  s.max_partitions = max_partitions;
  s.ladder = TileLadder::PowersOfTwo;
  s.mode = mode;
  return s;
}

/// Front per group, groups in name order.
void add_fronts(CaseStudy& cs, const std::string& pool, const std::vector<Evaluated>& results, const Group& group,
                const std::vector<Objective>& objectives, const Architecture& a) {
  std::map<std::string, std::vector<Evaluated>> groups;
  for (const auto& r : results) groups[group(r)].push_back(r);
  for (const auto& [label, members] : groups) {
    for (std::size_t i : pareto_front(members, objectives)) cs.rows.push_back(make_row(cs.name, label, members[i], a));
  }
  cs.pools[pool] = results;
}

std::vector<Evaluated> run(const MapspaceSpec& spec, const workload::FusionSet& w, const Architecture& a, int jobs) {
  return evaluate_all(w, a, enumerate_mapspace(spec, w, a), jobs);
}

std::string intermediate_depths(const workload::FusionSet& w, const mapping::Mapping& m) {
  std::string s;
  for (const auto& t : w.tensors()) {
    if (t.is_backed()) continue;
    s += (s.empty() ? "" : " ") + t.name + ":d" + std::to_string(m.retention_of(t.name).depth);
  }
  return s;
}

/// Best off-chip traffic of running the layers one at a time within each
/// candidate budget, reduced to its Pareto front.
std::vector<CsvRow> layer_by_layer_rows(const std::string& study, const std::vector<workload::FusionSet>& layers,
                                        const std::vector<std::vector<Evaluated>>& pools, const Architecture& a) {
  std::set<Count> budgets;
  for (const auto& pool : pools) {
    for (const auto& r : pool) {
      if (r.metrics.feasible) budgets.insert(r.metrics.onchip_words);
    }
  }
  std::vector<CsvRow> rows;
  std::vector<Point> pts;
  for (Count b : budgets) {
    CsvRow row;
    row.study = study;
    row.schedule = "layer_by_layer";
    row.parallelism = "sequential";
    bool ok = true;
    std::string breakdown;
    for (std::size_t k = 0; k < pools.size() && ok; ++k) {
      const Evaluated* best = nullptr;
      for (const auto& r : pools[k]) {
        if (!r.metrics.feasible || r.metrics.onchip_words > b) continue;
        if (!best || std::pair(r.metrics.offchip_words, r.metrics.onchip_words) <
                         std::pair(best->metrics.offchip_words, best->metrics.onchip_words)) {
          best = &r;
        }
      }
      if (!best) {
        ok = false;
        break;
      }
      const auto& name = layers[k].einsum(0).name;
      auto sub = make_row(study, "", *best, a);
      row.partitions += (k ? " | " : "") + name + "[" + sub.partitions + "]";
      row.retention += (k ? " | " : "") + sub.retention;
      row.occupancy_words = std::max(row.occupancy_words, sub.occupancy_words);
      row.offchip_words += sub.offchip_words;
      row.latency_cycles += sub.latency_cycles;
      row.energy_pj += sub.energy_pj;
      breakdown += std::string(k ? "," : "") + "\"" + name + "\":" + sub.breakdown_json;
    }
    if (!ok) continue;
    row.breakdown_json = "{" + breakdown + "}";
    pts.push_back({{static_cast<double>(row.occupancy_words), static_cast<double>(row.offchip_words)},
                   row.partitions + row.retention});
    rows.push_back(std::move(row));
  }
  std::vector<CsvRow> out;
  for (std::size_t i : pareto_filter(pts)) out.push_back(rows[i]);
  return out;
}

}  // namespace

std::vector<std::string> case_study_names() {
  return {"tiling_choice", "recompute_tradeoff", "per_tensor_retain", "per_fmap_choice", "fuse_or_not"};
}

Architecture default_study_architecture() {
  Architecture a;
  a.levels.push_back({"DRAM", std::nullopt, 16.0, 64.0, 64.0, 1, 0.0});
  a.levels.push_back({"GLB", std::nullopt, 64.0, 1.5, 2.0, 16, 0.25});
  a.compute = {16, 1, 0.5, 3};
  return a;
}

CaseStudy case_study(const std::string& name, const std::map<std::string, Coord>& shapes, const Architecture& a,
                     int jobs) {
  CaseStudy cs;
  cs.name = name;
  auto by_schedule = [](const Evaluated& r) { return schedule_label(r.mapping); };

  if (name == "tiling_choice") {
    auto w = templates::named_template("conv_conv", shapes);
    add_fronts(cs, "all", run(tiled(2, RetentionMode::PerTensor), w, a, jobs), by_schedule,
               {Objective::Occupancy, Objective::Offchip, Objective::Recompute}, a);
  } else if (name == "recompute_tradeoff") {
    auto w = templates::named_template("pwise_dwise_pwise", shapes);
    auto spec = tiled(2, RetentionMode::PerTensor);
    for (const auto& r : w.last().op_ranks()) {
      if (r[0] == 'P' || r[0] == 'Q') spec.ranks.push_back(r);
    }
    add_fronts(cs, "all", run(spec, w, a, jobs), by_schedule, {Objective::Occupancy, Objective::Recompute}, a);
  } else if (name == "per_tensor_retain") {
    auto w = templates::named_template("conv_conv", shapes);
    for (auto mode : {RetentionMode::Uniform, RetentionMode::PerTensor}) {
      const std::string label = mode == RetentionMode::Uniform ? "uniform" : "per_tensor";
      add_fronts(cs, label, run(tiled(2, mode), w, a, jobs), [&](const Evaluated&) { return label; },
                 {Objective::Occupancy, Objective::Offchip}, a);
    }
  } else if (name == "per_fmap_choice") {
    auto w = templates::named_template("conv_conv_conv", shapes);
    auto spec = tiled(2, RetentionMode::PerTensor);
    for (const auto& r : w.last().op_ranks()) {
      if (r[0] == 'P' || r[0] == 'Q') spec.ranks.push_back(r);
    }
    add_fronts(cs, "all", run(spec, w, a, jobs), [&](const Evaluated& r) { return intermediate_depths(w, r.mapping); },
               {Objective::Occupancy, Objective::Recompute}, a);
  } else if (name == "fuse_or_not") {
    auto w = templates::named_template("conv_conv", shapes);
    auto spec = tiled(2, RetentionMode::PerTensor);
    for (const auto& l : a.levels) spec.levels.push_back(l.name);
    add_fronts(cs, "fused", run(spec, w, a, jobs), [](const Evaluated&) { return std::string("fused"); },
               {Objective::Occupancy, Objective::Offchip}, a);
    auto layers = split_layers(w);
    std::vector<std::vector<Evaluated>> pools;
    for (const auto& l : layers) {
      pools.push_back(run(spec, l, a, jobs));
      cs.pools["layer:" + l.einsum(0).name] = pools.back();
    }
    for (auto& row : layer_by_layer_rows(name, layers, pools, a)) cs.rows.push_back(std::move(row));
  } else {
    throw UnknownNameError("unknown case study \"" + name + "\"");
  }
  return cs;
}

}  // namespace fusedflow::mapper
