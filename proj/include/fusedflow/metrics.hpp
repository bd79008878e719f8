// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "fusedflow/analysis.hpp"

namespace fusedflow::metrics {

using analysis::ActionCounts;

/// Per-tile latencies are indexed [layer][iteration].
using TileLatencies = std::vector<std::vector<Count>>;

Count sequential_latency(const TileLatencies& L);

/// Makespan of the pipelined schedule where tile i of layer k starts after
/// tile i of layer k-1 and tile i-1 of layer k. Runs of identical iteration
/// columns are collapsed, so cost grows with the number of runs.
Count pipeline_latency(const TileLatencies& L);

/// Direct evaluation of the recurrence; the reference for pipeline_latency.
Count pipeline_latency_dp(const TileLatencies& L);

/// Sequential latency minus hidden latency for `iterations` identical
/// iterations with the given per-stage costs.
Count pipeline_latency_uniform(const std::vector<Count>& stage_costs, Count iterations);

/// ceil(words / bandwidth) per level.
std::vector<Count> memory_latency(const ActionCounts& totals, const Architecture& a);

struct Energy {
  double total_pj = 0.0;
  /// `<level>.read`, `<level>.write`, `noc`, `compute`
  std::map<std::string, double> breakdown;
};

Energy energy(const ActionCounts& totals, const Architecture& a);

struct Occupancy {
  /// Peak words per level; the off-chip level is always 0.
  std::vector<Count> per_level;
  std::vector<std::map<std::string, Count>> per_tensor;
};

Occupancy peak_occupancy(const analysis::Evaluation& ev, const workload::FusionSet& w, const mapping::Mapping& m,
                         const Architecture& a);

/// Words read from and written to the off-chip level.
Count offchip_transfers(const ActionCounts& totals);

struct Metrics {
  Count latency_cycles = 0;
  Count compute_cycles = 0;
  std::vector<Count> memory_cycles;
  Energy energy;
  Occupancy occupancy;
  /// Sum of on-chip peaks; the capacity objective used by search.
  Count onchip_words = 0;
  Count offchip_words = 0;
  std::vector<Count> recompute_ops;
  Count total_recompute = 0;
  bool feasible = true;
  std::vector<std::string> capacity_violations;
  ActionCounts counts;
};

Metrics compute_metrics(const analysis::Evaluation& ev, const workload::FusionSet& w, const mapping::Mapping& m,
                        const Architecture& a);

/// Analyze and compute metrics in one step.
Metrics evaluate(const workload::FusionSet& w, const mapping::Mapping& m, const Architecture& a);

/// Energy values rounded to three decimals.
double round_pj(double pj);

std::string report_json(const Metrics& mt, const workload::FusionSet& w, const Architecture& a);

}  // namespace fusedflow::metrics
