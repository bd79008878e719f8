// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusedflow/check.hpp"

#include <set>

namespace fusedflow::check {

std::string Mismatch::describe() const {
  return counter + ": analytical " + std::to_string(analytical) + ", reference " + std::to_string(reference);
}

std::optional<Mismatch> compare(const analysis::Evaluation& ev, const metrics::Metrics& mt,
                                const oracle::SimResult& sim, const workload::FusionSet& w, const Architecture& a) {
  auto differ = [](const std::string& what, Count x, Count y) -> std::optional<Mismatch> {
    if (x == y) return std::nullopt;
    return Mismatch{what, x, y};
  };
  const auto nlev = static_cast<int>(a.levels.size());
  if (auto m = differ("iterations", static_cast<Count>(ev.tiles.iterations.size()),
                      static_cast<Count>(sim.tile_cycles.empty() ? 0 : sim.tile_cycles[0].size()))) {
    return m;
  }
  for (int l = 0; l < nlev; ++l) {
    std::set<std::string> names;
    for (const auto& [t, c] : mt.counts.levels[static_cast<std::size_t>(l)]) names.insert(t);
    for (const auto& [key, v] : sim.tallies) {
      if (key.first == l) names.insert(key.second);
    }
    for (const auto& t : names) {
      auto x = mt.counts.get(l, t);
      auto it = sim.tallies.find({l, t});
      oracle::Tally y = it == sim.tallies.end() ? oracle::Tally{} : it->second;
      const std::string where = a.levels[static_cast<std::size_t>(l)].name + "/" + t;
      if (auto m = differ(where + " fills", x.fills, y.fills)) return m;
      if (auto m = differ(where + " reads", x.reads, y.reads)) return m;
      if (auto m = differ(where + " updates", x.updates, y.updates)) return m;
    }
    if (auto m = differ(a.levels[static_cast<std::size_t>(l)].name + " noc_hops", mt.counts.hops[static_cast<std::size_t>(l)],
                        sim.hops[static_cast<std::size_t>(l)])) {
      return m;
    }
  }
  if (auto m = differ("compute_ops", mt.counts.compute_ops, sim.compute_ops)) return m;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (auto m = differ(w.einsum(k).name + " recompute_ops", mt.recompute_ops[k], sim.recompute_ops[k])) return m;
  }
  if (auto m = differ("offchip_words", mt.offchip_words, sim.offchip_words)) return m;
  for (int l = 1; l < nlev; ++l) {
    const auto lu = static_cast<std::size_t>(l);
    const std::string& name = a.levels[lu].name;
    if (auto m = differ(name + " peak occupancy", mt.occupancy.per_level[lu], sim.peak_occupancy[lu])) return m;
    std::set<std::string> names;
    for (const auto& [t, v] : mt.occupancy.per_tensor[lu]) names.insert(t);
    for (const auto& [t, v] : sim.peak_per_tensor[lu]) names.insert(t);
    for (const auto& t : names) {
      auto x = mt.occupancy.per_tensor[lu].count(t) ? mt.occupancy.per_tensor[lu].at(t) : 0;
      auto y = sim.peak_per_tensor[lu].count(t) ? sim.peak_per_tensor[lu].at(t) : 0;
      if (auto m = differ(name + "/" + t + " peak occupancy", x, y)) return m;
    }
  }
  for (std::size_t k = 0; k < w.size(); ++k) {
    for (std::size_t i = 0; i < ev.tile_cycles[k].size(); ++i) {
      if (auto m = differ(w.einsum(k).name + " tile " + std::to_string(i) + " cycles", ev.tile_cycles[k][i],
                          sim.tile_cycles[k][i])) {
        return m;
      }
    }
  }
  return std::nullopt;
}

}  // namespace fusedflow::check
