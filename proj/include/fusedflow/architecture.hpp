// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fusedflow/common.hpp"

namespace fusedflow {

/// One buffer level. Level 0 is the off-chip backing store.
struct BufferLevel {
  std::string name;
  std::optional<Count> capacity;  ///< words; unset means unbounded
  double bandwidth = 1.0;         ///< words per cycle
  double read_energy = 0.0;       ///< pJ per word
  double write_energy = 0.0;      ///< pJ per word
  int fanout = 1;
  double hop_energy = 0.0;        ///< pJ per word-hop

  bool operator==(const BufferLevel&) const = default;
};

struct ComputeSpec {
  int units = 1;
  int ops_per_cycle_per_unit = 1;
  double op_energy = 0.0;
  int pipeline_stages = 1;

  bool operator==(const ComputeSpec&) const = default;
};

struct Architecture {
  std::vector<BufferLevel> levels;
  ComputeSpec compute;

  /// Index of the innermost buffer (the one feeding compute).
  int innermost() const { return static_cast<int>(levels.size()) - 1; }
  /// Throws UnknownNameError.
  int level_index(std::string_view name) const;
  const BufferLevel& level(int i) const { return levels.at(static_cast<std::size_t>(i)); }

  bool operator==(const Architecture&) const = default;
};

/// Parses `{"levels":[...], "compute":{...}}`, top level first.
Architecture parse_architecture(std::string_view text);
std::string serialize_architecture(const Architecture& a);

}  // namespace fusedflow
