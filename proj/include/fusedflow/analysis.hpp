// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

// Tile-shape inference across a fusion set and per-tile action counting.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "fusedflow/architecture.hpp"
#include "fusedflow/mapping.hpp"
#include "fusedflow/workload.hpp"

namespace fusedflow::analysis {

using geometry::Region;

struct TensorCounts {
  Count fills = 0;    ///< words written into the level from its parent
  Count reads = 0;    ///< words read out of the level
  Count updates = 0;  ///< words written into the level from below

  TensorCounts& operator+=(const TensorCounts& o);
  bool operator==(const TensorCounts&) const = default;
};

struct ActionCounts {
  /// Indexed by level, then tensor name.
  std::vector<std::map<std::string, TensorCounts>> levels;
  std::vector<Count> hops;
  Count compute_ops = 0;
  Count compute_cycles = 0;

  ActionCounts() = default;
  explicit ActionCounts(std::size_t num_levels) : levels(num_levels), hops(num_levels, 0) {}

  TensorCounts& at(int level, const std::string& tensor) { return levels.at(static_cast<std::size_t>(level))[tensor]; }
  TensorCounts get(int level, const std::string& tensor) const;
  /// fills + reads + updates over every tensor at `level`.
  Count level_words(int level) const;
  void add(const ActionCounts& o, Count multiplicity = 1);
  /// Drops all-zero entries so equal counts compare equal.
  void normalize();
  bool operator==(const ActionCounts&) const = default;
};

/// Level index per tensor, taken from the mapping's retention choices.
std::map<std::string, int> retention_levels(const mapping::Mapping& m, const Architecture& a);

struct LayerTile {
  std::size_t einsum = 0;
  std::size_t iteration = 0;
  Region ops;
  std::map<std::string, Region> data;
  std::map<std::string, Region> new_data;
};

struct TileAnalysis {
  std::vector<std::vector<Coord>> iterations;
  /// [iteration][einsum]
  std::vector<std::vector<LayerTile>> tiles;
  /// Retained contents of each tensor's buffer after each iteration.
  std::map<std::string, std::vector<Region>> buffer_after;
  /// For the external output: points written before each iteration.
  std::vector<Region> output_history;
};

/// Back-propagates tiles from the last layer through the fusion set, one
/// iteration at a time, subtracting retained data.
TileAnalysis infer_tiles(const workload::FusionSet& w, const mapping::Mapping& m);

/// Executed minus distinct operations per layer.
std::vector<Count> recompute_ops(const workload::FusionSet& w, const TileAnalysis& tiles);

struct TileClass {
  std::size_t einsum = 0;
  std::string signature;
  std::vector<std::size_t> iterations;
  Count multiplicity() const { return static_cast<Count>(iterations.size()); }
};

/// Groups tiles of each layer by shape signature (operations, new data and
/// output history, all translated to the tile's origin).
std::vector<TileClass> dedupe_tiles(const workload::FusionSet& w, const TileAnalysis& tiles);

struct TileCounts {
  ActionCounts counts;
  /// Per level, the largest total footprint of in-flight chunks.
  std::vector<Count> chunk_peak;
  /// Per level and tensor, the largest chunk footprint.
  std::vector<std::map<std::string, Count>> chunk_peak_per_tensor;
};

/// Intra-layer counts for one tile: chunked fills along each tensor's
/// buffer chain, deliveries to compute with multicast and hops, output
/// write-backs, and compute. `output_history` holds output points with
/// earlier partial sums.
TileCounts per_tile_counts(const workload::Einsum& e, const Region& ops, const Region& output_history,
                           const std::vector<mapping::NestLoop>& nest, const Architecture& a,
                           const std::map<std::string, int>& levels);

/// Full analytical evaluation of one mapping.
struct Evaluation {
  TileAnalysis tiles;
  std::vector<TileClass> classes;
  std::vector<TileCounts> class_counts;
  /// [einsum][iteration] -> class index
  std::vector<std::vector<std::size_t>> class_of;
  ActionCounts totals;
  std::vector<Count> recompute;
  /// [einsum][iteration] compute cycles
  std::vector<std::vector<Count>> tile_cycles;
};

Evaluation analyze(const workload::FusionSet& w, const mapping::Mapping& m, const Architecture& a);

}  // namespace fusedflow::analysis
