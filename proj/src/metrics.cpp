// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusedflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace fusedflow::metrics {

using geometry::Region;
using mapping::Parallelism;

Count sequential_latency(const TileLatencies& L) {
  Count total = 0;
  for (const auto& row : L) total = std::accumulate(row.begin(), row.end(), total);
  return total;
}

Count pipeline_latency_dp(const TileLatencies& L) {
  if (L.empty() || L[0].empty()) return 0;
  const std::size_t n = L[0].size();
  std::vector<Count> prev(n, 0);
  for (const auto& row : L) {
    std::vector<Count> cur(n, 0);
    Count left = 0;
    for (std::size_t i = 0; i < n; ++i) {
      cur[i] = std::max(left, prev[i]) + row[i];
      left = cur[i];
    }
    prev = std::move(cur);
  }
  return prev.back();
}

namespace {

bool same_column(const TileLatencies& L, std::size_t i, std::size_t j) {
  return std::all_of(L.begin(), L.end(), [&](const std::vector<Count>& row) { return row[i] == row[j]; });
}

}  // namespace

Count pipeline_latency(const TileLatencies& L) {
  if (L.empty() || L[0].empty()) return 0;
  const std::size_t S = L.size();
  const std::size_t n = L[0].size();
  std::vector<Count> finish(S, 0);
  std::size_t i = 0;
  std::vector<Count> c(S);
  while (i < n) {
    for (std::size_t k = 0; k < S; ++k) c[k] = L[k][i];
    std::size_t j = i + 1;
    while (j < n && same_column(L, i, j)) ++j;
    const Count runs = static_cast<Count>(j - i);
    // Longest path through the run's grid, entering from the previous finish
    // times on the left edge.
    std::vector<Count> next(S, 0);
    for (std::size_t k = 0; k < S; ++k) {
      Count best = 0;
      Count sum = 0;
      Count mx = 0;
      for (std::size_t s = k + 1; s-- > 0;) {
        sum += c[s];
        mx = std::max(mx, c[s]);
        best = std::max(best, finish[s] + sum + (runs - 1) * mx);
      }
      next[k] = best;
    }
    finish = std::move(next);
    i = j;
  }
  return finish.back();
}

Count pipeline_latency_uniform(const std::vector<Count>& stage_costs, Count iterations) {
  if (stage_costs.empty() || iterations == 0) return 0;
  const Count sum = std::accumulate(stage_costs.begin(), stage_costs.end(), Count{0});
  const Count mx = *std::max_element(stage_costs.begin(), stage_costs.end());
  const Count sequential = iterations * sum;
  const Count hidden = (iterations - 1) * (sum - mx);
  return sequential - hidden;
}

std::vector<Count> memory_latency(const ActionCounts& totals, const Architecture& a) {
  std::vector<Count> out(a.levels.size(), 0);
  for (std::size_t l = 0; l < a.levels.size(); ++l) {
    const Count words = l < totals.levels.size() ? totals.level_words(static_cast<int>(l)) : 0;
    const double bw = a.levels[l].bandwidth;
    if (bw <= 0) throw Error("level " + a.levels[l].name + " has zero bandwidth");
    if (bw == std::floor(bw)) {
      out[l] = ceil_div(words, static_cast<Count>(bw));
    } else {
      out[l] = static_cast<Count>(std::ceil(static_cast<double>(words) / bw));
    }
  }
  return out;
}

Energy energy(const ActionCounts& totals, const Architecture& a) {
  Energy e;
  for (std::size_t l = 0; l < a.levels.size() && l < totals.levels.size(); ++l) {
    const auto& lv = a.levels[l];
    Count reads = 0;
    Count writes = 0;
    for (const auto& [t, c] : totals.levels[l]) {
      reads += c.reads;
      writes += c.fills + c.updates;
    }
    e.breakdown[lv.name + ".read"] = static_cast<double>(reads) * lv.read_energy;
    e.breakdown[lv.name + ".write"] = static_cast<double>(writes) * lv.write_energy;
  }
  double noc = 0.0;
  for (std::size_t l = 0; l < a.levels.size() && l < totals.hops.size(); ++l) {
    noc += static_cast<double>(totals.hops[l]) * a.levels[l].hop_energy;
  }
  e.breakdown["noc"] = noc;
  e.breakdown["compute"] = static_cast<double>(totals.compute_ops) * a.compute.op_energy;
  for (const auto& [k, v] : e.breakdown) e.total_pj += v;
  return e;
}

Occupancy peak_occupancy(const analysis::Evaluation& ev, const workload::FusionSet& w, const mapping::Mapping& m,
                         const Architecture& a) {
  const std::size_t nlev = a.levels.size();
  const std::size_t L = w.size();
  const auto& tiles = ev.tiles;
  const std::size_t n = tiles.iterations.size();
  const auto levels = analysis::retention_levels(m, a);
  Occupancy occ;
  occ.per_level.assign(nlev, 0);
  occ.per_tensor.assign(nlev, {});

  const bool pipeline = m.parallelism == Parallelism::Pipeline;
  const std::size_t steps = pipeline ? n + L - 1 : n;
  auto active = [&](std::size_t s, std::size_t k) -> long {
    if (!pipeline) return static_cast<long>(s);
    long i = static_cast<long>(s) - static_cast<long>(k);
    return (i >= 0 && i < static_cast<long>(n)) ? i : -1;
  };

  for (std::size_t s = 0; s < steps; ++s) {
    std::vector<Count> total(nlev, 0);
    std::vector<Count> chunk_total(nlev, 0);
    for (const auto& t : w.tensors()) {
      const int lt = levels.at(t.name);
      if (lt == 0) continue;
      const auto& after = tiles.buffer_after.at(t.name);
      Count live = 0;
      if (t.role == workload::TensorRole::Intermediate) {
        const auto p = static_cast<std::size_t>(t.producer);
        const auto c = static_cast<std::size_t>(t.consumer);
        if (!pipeline) {
          live = after[s].count();
        } else {
          long read_at = active(s, c);
          long write_at = active(s, p);
          Region r(t.dims);
          if (read_at >= 0) r = after[static_cast<std::size_t>(read_at)];
          if (write_at >= 0) r = geometry::unite(r, tiles.tiles[static_cast<std::size_t>(write_at)][c].new_data.at(t.name));
          live = r.count();
        }
      } else {
        const std::size_t owner = t.consumer >= 0 ? static_cast<std::size_t>(t.consumer) : L - 1;
        long i = active(s, owner);
        if (i >= 0) live = after[static_cast<std::size_t>(i)].count();
      }
      total[static_cast<std::size_t>(lt)] += live;
      auto& pt = occ.per_tensor[static_cast<std::size_t>(lt)][t.name];
      pt = std::max(pt, live);
    }
    for (std::size_t k = 0; k < L; ++k) {
      long i = active(s, k);
      if (i < 0) continue;
      const auto& tc = ev.class_counts[ev.class_of[k][static_cast<std::size_t>(i)]];
      for (std::size_t l = 1; l < nlev; ++l) {
        if (pipeline) chunk_total[l] += tc.chunk_peak[l];
        else chunk_total[l] = std::max(chunk_total[l], tc.chunk_peak[l]);
        for (const auto& [t, v] : tc.chunk_peak_per_tensor[l]) {
          auto& pt = occ.per_tensor[l][t];
          pt = std::max(pt, v);
        }
      }
    }
    for (std::size_t l = 1; l < nlev; ++l) occ.per_level[l] = std::max(occ.per_level[l], total[l] + chunk_total[l]);
  }
  return occ;
}

Count offchip_transfers(const ActionCounts& totals) {
  if (totals.levels.empty()) return 0;
  return totals.level_words(0);
}

Metrics compute_metrics(const analysis::Evaluation& ev, const workload::FusionSet& w, const mapping::Mapping& m,
                        const Architecture& a) {
  Metrics mt;
  mt.counts = ev.totals;
  mt.compute_cycles = m.parallelism == Parallelism::Pipeline ? pipeline_latency(ev.tile_cycles)
                                                              : sequential_latency(ev.tile_cycles);
  mt.memory_cycles = memory_latency(ev.totals, a);
  mt.latency_cycles = mt.compute_cycles;
  for (Count c : mt.memory_cycles) mt.latency_cycles = std::max(mt.latency_cycles, c);
  mt.energy = energy(ev.totals, a);
  mt.occupancy = peak_occupancy(ev, w, m, a);
  for (std::size_t l = 1; l < a.levels.size(); ++l) {
    mt.onchip_words += mt.occupancy.per_level[l];
    const auto& cap = a.levels[l].capacity;
    if (cap && mt.occupancy.per_level[l] > *cap) {
      mt.feasible = false;
      mt.capacity_violations.push_back("level " + a.levels[l].name + " needs " +
                                       std::to_string(mt.occupancy.per_level[l]) + " words but holds " +
                                       std::to_string(*cap));
    }
  }
  mt.offchip_words = offchip_transfers(ev.totals);
  mt.recompute_ops = ev.recompute;
  mt.total_recompute = std::accumulate(ev.recompute.begin(), ev.recompute.end(), Count{0});
  return mt;
}

Metrics evaluate(const workload::FusionSet& w, const mapping::Mapping& m, const Architecture& a) {
  return compute_metrics(analysis::analyze(w, m, a), w, m, a);
}

double round_pj(double pj) { return std::round(pj * 1000.0) / 1000.0; }

std::string report_json(const Metrics& mt, const workload::FusionSet& w, const Architecture& a) {
  using json = nlohmann::ordered_json;
  json breakdown = json::object();
  for (const auto& [k, v] : mt.energy.breakdown) breakdown[k] = round_pj(v);
  json occupancy = json::object();
  for (std::size_t l = 1; l < a.levels.size(); ++l) {
    json per_tensor = json::object();
    for (const auto& [t, v] : mt.occupancy.per_tensor[l]) per_tensor[t] = v;
    json lv{{"total", mt.occupancy.per_level[l]}, {"per_tensor", per_tensor}};
    if (a.levels[l].capacity) lv["capacity"] = *a.levels[l].capacity;
    occupancy[a.levels[l].name] = lv;
  }
  json recompute = json::object();
  for (std::size_t k = 0; k < w.size(); ++k) recompute[w.einsum(k).name] = mt.recompute_ops[k];
  json memory = json::object();
  for (std::size_t l = 0; l < a.levels.size(); ++l) memory[a.levels[l].name] = mt.memory_cycles[l];
  json counts = json::object();
  for (std::size_t l = 0; l < a.levels.size() && l < mt.counts.levels.size(); ++l) {
    json lv = json::object();
    for (const auto& [t, c] : mt.counts.levels[l]) {
      lv[t] = {{"fills", c.fills}, {"reads", c.reads}, {"updates", c.updates}};
    }
    lv["noc_hops"] = mt.counts.hops[l];
    counts[a.levels[l].name] = lv;
  }
  json doc{{"feasible", mt.feasible},
           {"latency", {{"cycles", mt.latency_cycles}, {"compute_cycles", mt.compute_cycles}, {"memory_cycles", memory}}},
           {"energy", {{"total", round_pj(mt.energy.total_pj)}, {"breakdown", breakdown}}},
           {"occupancy", occupancy},
           {"offchip_words", mt.offchip_words},
           {"recompute_ops", recompute},
           {"compute_ops", mt.counts.compute_ops},
           {"counts", counts}};
  if (!mt.feasible) doc["capacity_violations"] = mt.capacity_violations;
  return doc.dump(2);
}

}  // namespace fusedflow::metrics
