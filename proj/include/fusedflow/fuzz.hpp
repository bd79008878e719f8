// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

// Seeded generators of small random fusion sets, architectures and valid
// mappings, used to cross-check the analytical model against the simulator.

#pragma once

#include <random>
#include <string>

#include "fusedflow/architecture.hpp"
#include "fusedflow/mapping.hpp"
#include "fusedflow/workload.hpp"

namespace fusedflow::fuzz {

struct Options {
  Coord max_shape = 8;
  /// Bound on the untiled operation count of the whole fusion set.
  Count max_ops = 100000;
  int min_layers = 2;
  int max_layers = 3;
};

struct Case {
  workload::FusionSet workload;
  Architecture arch;
  mapping::Mapping mapping;
  std::string label;
};

workload::FusionSet random_fusion_set(std::mt19937_64& rng, const Options& opt);
Architecture random_architecture(std::mt19937_64& rng);
/// Always returns a mapping that passes validation.
mapping::Mapping random_mapping(std::mt19937_64& rng, const workload::FusionSet& w, const Architecture& a);

Case random_case(std::uint64_t seed, const Options& opt = {});

}  // namespace fusedflow::fuzz
