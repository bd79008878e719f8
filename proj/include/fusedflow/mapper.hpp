// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

// Bounded mapspace enumeration, parallel evaluation and Pareto filtering.

#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fusedflow/metrics.hpp"

namespace fusedflow::mapper {

enum class TileLadder { Divisors, PowersOfTwo, List };
enum class RetentionMode { PerTensor, Uniform };

struct MapspaceSpec {
  /// Candidate partition ranks of the last Einsum; empty means its output ranks.
  std::vector<std::string> ranks;
  /// Explicit rank orders; when set, replaces subsets/permutations of `ranks`.
  std::optional<std::vector<std::vector<std::string>>> orders;
  int max_partitions = 2;
  TileLadder ladder = TileLadder::Divisors;
  std::vector<Coord> tile_list;
  RetentionMode mode = RetentionMode::PerTensor;
  /// Allowed depths; empty means 0..#partitions.
  std::vector<int> depths;
  /// Allowed retention levels; empty means every on-chip level. Backed
  /// tensors may also name the off-chip level (streamed, not retained).
  std::vector<std::string> levels;
  std::vector<mapping::Parallelism> parallelism{mapping::Parallelism::Sequential};
  /// Intra-layer nests copied into every mapping.
  std::map<std::string, std::vector<mapping::IntraLoop>> intra;
  /// Enumeration stops with LimitExceededError past this many mappings.
  std::size_t limit = 2'000'000;
};

MapspaceSpec parse_mapspace(std::string_view text);
std::string serialize_mapspace(const MapspaceSpec& spec);

/// Tile sizes tried for a rank of the given extent.
std::vector<Coord> tile_sizes(const MapspaceSpec& spec, Coord extent);

/// Calls `visit` for each valid mapping in deterministic order.
void for_each_mapping(const MapspaceSpec& spec, const workload::FusionSet& w, const Architecture& a,
                      const std::function<void(const mapping::Mapping&)>& visit);

std::vector<mapping::Mapping> enumerate_mapspace(const MapspaceSpec& spec, const workload::FusionSet& w,
                                                 const Architecture& a);

struct Evaluated {
  mapping::Mapping mapping;
  metrics::Metrics metrics;
};

/// Parallel over mappings; result i belongs to mapping i. `jobs` <= 0 uses
/// the OpenMP default.
std::vector<Evaluated> evaluate_all(const workload::FusionSet& w, const Architecture& a,
                                    const std::vector<mapping::Mapping>& mappings, int jobs = 0);
std::vector<Evaluated> evaluate_all_serial(const workload::FusionSet& w, const Architecture& a,
                                           const std::vector<mapping::Mapping>& mappings);

enum class Objective { Occupancy, Offchip, Recompute, Latency, Energy };
constexpr std::array<Objective, 5> kAllObjectives{Objective::Occupancy, Objective::Offchip, Objective::Recompute,
                                                  Objective::Latency, Objective::Energy};

Objective parse_objective(const std::string& name);
const char* to_string(Objective o);
double objective_value(const metrics::Metrics& mt, Objective o);

struct Point {
  std::vector<double> values;
  std::string label;  ///< tie-break key
};

/// Indices of the non-dominated points, ordered by objective vector. Among
/// equal vectors only the one with the smallest label survives.
std::vector<std::size_t> pareto_filter(const std::vector<Point>& points);

/// Front over feasible mappings only.
std::vector<std::size_t> pareto_front(const std::vector<Evaluated>& results, const std::vector<Objective>& objectives);

/// Rank order, e.g. `P2>Q2`, or `untiled`.
std::string schedule_label(const mapping::Mapping& m);
std::string partitions_label(const mapping::Mapping& m);
std::string retention_label(const mapping::Mapping& m);

struct CsvRow {
  std::string study;
  std::string schedule;
  std::string partitions;
  std::string retention;
  std::string parallelism;
  Count occupancy_words = 0;
  Count offchip_words = 0;
  Count recompute_ops = 0;
  Count latency_cycles = 0;
  double energy_pj = 0.0;
  /// Compact JSON: level -> tensor -> peak words.
  std::string breakdown_json;
};

CsvRow make_row(const std::string& study, const std::string& schedule, const Evaluated& r, const Architecture& a);
std::string csv_header();
std::string csv_rows(const std::vector<CsvRow>& rows);

struct CaseStudy {
  std::string name;
  std::vector<CsvRow> rows;
  /// Every evaluated mapping, keyed by group (schedule or variant).
  std::map<std::string, std::vector<Evaluated>> pools;
};

std::vector<std::string> case_study_names();
/// Two-level architecture used when a study is run without one.
Architecture default_study_architecture();
/// Shape overrides are passed to the study's fusion-set template.
CaseStudy case_study(const std::string& name, const std::map<std::string, Coord>& shapes, const Architecture& a,
                     int jobs = 0);

/// Smallest off-chip traffic among feasible results whose on-chip peak fits
/// `budget` words; nullopt when none fits.
std::optional<Count> best_offchip_within(const std::vector<Evaluated>& results, Count budget);

/// Each layer as its own one-layer fusion set; intermediates become
/// off-chip tensors.
std::vector<workload::FusionSet> split_layers(const workload::FusionSet& w);

}  // namespace fusedflow::mapper
