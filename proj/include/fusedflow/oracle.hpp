// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference simulator. Executes every operation of every tile
// in schedule order and tracks buffer contents as explicit point sets. It
// shares only the workload, mapping and architecture descriptions with the
// analytical model.

#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fusedflow/architecture.hpp"
#include "fusedflow/mapping.hpp"
#include "fusedflow/workload.hpp"

namespace fusedflow::oracle {

struct Tally {
  Count fills = 0;
  Count reads = 0;
  Count updates = 0;
};

struct OccupancySample {
  std::size_t step = 0;
  std::string level;
  std::string tensor;  ///< empty for the level total
  Count words = 0;
};

struct SimResult {
  /// (level index, tensor) -> tally; only nonzero entries are present.
  std::map<std::pair<int, std::string>, Tally> tallies;
  std::vector<Count> hops;
  Count compute_ops = 0;
  std::vector<Count> executed_ops;   ///< per layer
  std::vector<Count> recompute_ops;  ///< per layer
  Count offchip_words = 0;
  std::vector<Count> peak_occupancy;  ///< per level
  std::vector<std::map<std::string, Count>> peak_per_tensor;
  /// [layer][iteration] compute cycles
  std::vector<std::vector<Count>> tile_cycles;
  std::vector<OccupancySample> trace;
};

/// Throws LimitExceededError when more than `op_limit` operations would be
/// executed, InvalidMappingError for invalid mappings.
SimResult simulate(const workload::FusionSet& w, const mapping::Mapping& m, const Architecture& a, Count op_limit);

/// `step,level,tensor,occupancy` rows.
std::string trace_csv(const SimResult& r);

}  // namespace fusedflow::oracle
