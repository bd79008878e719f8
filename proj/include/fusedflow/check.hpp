// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

// Cross-checks the analytical model against the reference simulator.

#pragma once

#include <optional>
#include <string>

#include "fusedflow/metrics.hpp"
#include "fusedflow/oracle.hpp"

namespace fusedflow::check {

struct Mismatch {
  std::string counter;
  Count analytical = 0;
  Count reference = 0;

  std::string describe() const;
};

/// First counter on which the two paths disagree, in a fixed order: action
/// tallies, hops, compute, recompute, off-chip, occupancy, tile latencies.
std::optional<Mismatch> compare(const analysis::Evaluation& ev, const metrics::Metrics& mt,
                                const oracle::SimResult& sim, const workload::FusionSet& w, const Architecture& a);

}  // namespace fusedflow::check
