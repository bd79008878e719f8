// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

// Fusion sets written as extended Einsums: each layer names an output
// projection, input projections with affine index expressions, and the
// shape of every rank.

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusedflow/geometry.hpp"

namespace fusedflow::workload {

using RankId = std::string;
using geometry::AffineExpr;
using geometry::RankTuple;

enum class TensorRole { ExternalInput, Filter, Intermediate, ExternalOutput };
enum class ReuseClass { Full, Conv, None };

const char* to_string(TensorRole role);
const char* to_string(ReuseClass reuse);

struct TensorProjection {
  std::string tensor;
  std::vector<AffineExpr> exprs;
  /// Names of the tensor's data ranks; filled in when the fusion set is built.
  RankTuple data_ranks;
  /// Role written in the input file, if any.
  std::optional<TensorRole> declared_role;

  bool operator==(const TensorProjection&) const = default;
};

struct Einsum {
  std::string name;
  TensorProjection output;
  std::vector<TensorProjection> inputs;
  /// Shapes of operation ranks and of named data ranks (e.g. H).
  std::map<RankId, Coord> rank_shapes;

  /// Operation ranks: output indices first, then input indices in order of
  /// first appearance.
  RankTuple op_ranks() const;
  Coord shape(const RankId& rank) const;
  bool has_op_rank(const RankId& rank) const;
  /// Output followed by inputs.
  std::vector<const TensorProjection*> projections() const;
  const TensorProjection& projection(const std::string& tensor) const;
  bool uses(const std::string& tensor) const;
  /// Operation ranks absent from the output projection.
  RankTuple reduction_ranks() const;

  bool operator==(const Einsum&) const = default;
};

struct TensorInfo {
  std::string name;
  TensorRole role = TensorRole::ExternalInput;
  RankTuple dims;
  std::vector<Coord> extents;
  int producer = -1;  ///< einsum index writing the tensor, -1 if none
  int consumer = -1;  ///< einsum index reading the tensor, -1 if none

  bool is_backed() const { return role != TensorRole::Intermediate; }
  bool is_output() const { return role == TensorRole::ExternalOutput; }
  bool operator==(const TensorInfo&) const = default;
};

/// Ordered chain of Einsums; immutable once built.
class FusionSet {
 public:
  /// Validates the chain, resolves data ranks and infers tensor roles.
  explicit FusionSet(std::vector<Einsum> einsums);

  const std::vector<Einsum>& einsums() const { return einsums_; }
  std::size_t size() const { return einsums_.size(); }
  const Einsum& einsum(std::size_t i) const { return einsums_.at(i); }
  const Einsum& last() const { return einsums_.back(); }
  int einsum_index(const std::string& name) const;

  /// Tensors ordered by einsum, output before inputs, first appearance wins.
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
  /// Every tensor read or written by einsum `i`.
  std::vector<std::string> tensors_of(std::size_t i) const;
  geometry::Region tensor_extent(const std::string& name) const;

  bool operator==(const FusionSet& other) const { return einsums_ == other.einsums_; }

 private:
  std::vector<Einsum> einsums_;
  std::vector<TensorInfo> tensors_;
};

/// Parses the JSON workload format; throws ParseError, ShapeError, ChainError.
FusionSet parse_workload(std::string_view text);
std::string serialize_workload(const FusionSet& fs);

/// Reuse of each tensor's tiles when `rank` is partitioned.
std::map<std::string, ReuseClass> classify_reuse(const Einsum& einsum, const RankId& rank);

/// Operation point (over op_ranks) -> data point of `tensor`.
geometry::AffineRelation data_relation(const Einsum& einsum, const std::string& tensor);

geometry::Region operation_space(const Einsum& einsum);

/// Operations of `producer` whose output lands in `needed` (a region over the
/// producer's output ranks), over the full extent of its reduction ranks.
geometry::Region producer_ops(const geometry::Region& needed, const Einsum& producer);

/// Number of operations of `einsum` that access `point` of `tensor`.
Count access_multiplicity(const Einsum& einsum, const std::string& tensor, std::span<const Coord> point);

}  // namespace fusedflow::workload
