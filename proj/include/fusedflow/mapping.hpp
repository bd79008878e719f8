// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

// Mappings of a fusion set: inter-layer partitions of the last layer's
// operation space (their order is the schedule), per-tensor retention
// choices, and an intra-layer loop nest per layer.

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fusedflow/architecture.hpp"
#include "fusedflow/workload.hpp"

namespace fusedflow::mapping {

using workload::RankId;

enum class Parallelism { Sequential, Pipeline };
enum class LoopKind { Temporal, Spatial };

const char* to_string(Parallelism p);

struct Partition {
  RankId rank;
  Coord tile_size = 1;
  bool operator==(const Partition&) const = default;
};

struct RetentionChoice {
  std::string tensor;
  /// 0 keeps the whole tensor; d keeps the tile formed by the first d partitions.
  int depth = 0;
  std::string level;
  bool operator==(const RetentionChoice&) const = default;
};

struct IntraLoop {
  RankId rank;
  Coord tile_size = 1;
  LoopKind kind = LoopKind::Temporal;
  std::string level;
  bool operator==(const IntraLoop&) const = default;
};

struct Mapping {
  std::vector<Partition> partitions;
  Parallelism parallelism = Parallelism::Sequential;
  std::vector<RetentionChoice> retention;
  /// Einsum name -> loops, outermost first. Missing layers use the default nest.
  std::map<std::string, std::vector<IntraLoop>> intra;

  const RetentionChoice& retention_of(const std::string& tensor) const;
  bool operator==(const Mapping&) const = default;
};

Mapping parse_mapping(std::string_view text);
std::string serialize_mapping(const Mapping& m);

/// Human-readable rule violations; empty when the mapping is valid.
std::vector<std::string> validate_mapping(const Mapping& m, const workload::FusionSet& w, const Architecture& a);
/// Throws InvalidMappingError listing every violation.
void require_valid(const Mapping& m, const workload::FusionSet& w, const Architecture& a);

/// Ceiling trip count of each partition; nested partitions of the same rank
/// divide the enclosing tile size.
std::vector<Coord> partition_trips(const Mapping& m, const workload::FusionSet& w);

/// Tile coordinates in schedule (lexicographic) order. Coordinates whose
/// tile is empty, which only happens under nested imperfect partitions, are
/// skipped.
std::vector<std::vector<Coord>> iteration_space(const Mapping& m, const workload::FusionSet& w);

/// Operation box of the last layer formed by the first `depth` partitions at
/// the given coordinate; empty if the coordinate falls outside the space.
geometry::Region partition_tile(const Mapping& m, const workload::FusionSet& w, std::span<const Coord> coord,
                                std::size_t depth);

/// An intra-layer loop with its level resolved to an index.
struct NestLoop {
  RankId rank;
  Coord tile_size = 1;
  LoopKind kind = LoopKind::Temporal;
  int level = 0;
  /// Number of spatial units for spatial loops; 1 for temporal loops.
  Coord radix = 1;
};

/// The layer's loops followed by implicit unit-size temporal loops for every
/// rank at the innermost level.
std::vector<NestLoop> effective_nest(const Mapping& m, const workload::Einsum& e, const Architecture& a);

/// Number of spatial units a layer's nest occupies.
Coord spatial_units(const std::vector<NestLoop>& nest);

}  // namespace fusedflow::mapping
