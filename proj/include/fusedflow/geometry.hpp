// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

// Exact finite integer-set algebra over unions of boxes of strided
// intervals, plus images under affine maps with at most two index terms per
// output coordinate. Every operation is exact; nothing is over-approximated.

#pragma once

#include <compare>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fusedflow/common.hpp"

namespace fusedflow::geometry {

/// {lo, lo+stride, ..., hi}. Single points are normalized to stride 1.
struct StridedInterval {
  Coord lo = 0;
  Coord hi = 0;
  Coord stride = 1;

  /// Builds a validated interval; `hi` is rounded down onto the lattice.
  static StridedInterval make(Coord lo, Coord hi, Coord stride = 1);
  static StridedInterval point(Coord v) { return {v, v, 1}; }

  Count size() const { return (hi - lo) / stride + 1; }
  bool contains(Coord v) const { return v >= lo && v <= hi && (v - lo) % stride == 0; }
  bool is_point() const { return lo == hi; }

  auto operator<=>(const StridedInterval&) const = default;
};

std::optional<StridedInterval> intersect(const StridedInterval& a, const StridedInterval& b);

/// a \ b as pairwise-disjoint intervals, ordered by lower bound.
std::vector<StridedInterval> subtract(const StridedInterval& a, const StridedInterval& b);

using RankTuple = std::vector<std::string>;

struct Box {
  std::vector<StridedInterval> dims;

  Count size() const;
  bool contains(std::span<const Coord> point) const;
  auto operator<=>(const Box&) const = default;
};

std::optional<Box> intersect(const Box& a, const Box& b);

/// Finite set of integer points over a named rank tuple, stored as
/// pairwise-disjoint boxes in canonical (merged, sorted) order.
class Region {
 public:
  Region() = default;
  explicit Region(RankTuple ranks) : ranks_(std::make_shared<const RankTuple>(std::move(ranks))) {}

  /// Boxes must be pairwise disjoint; they are merged and sorted.
  static Region from_disjoint(RankTuple ranks, std::vector<Box> boxes);
  /// Boxes may overlap.
  static Region from_boxes(RankTuple ranks, const std::vector<Box>& boxes);
  static Region of_box(RankTuple ranks, Box box);
  /// Same rank tuple, the given pairwise-disjoint boxes.
  Region with_boxes(std::vector<Box> boxes) const;

  const RankTuple& ranks() const;
  bool same_ranks(const Region& other) const;
  const std::vector<Box>& boxes() const { return boxes_; }
  std::size_t rank_count() const { return ranks().size(); }
  bool empty() const { return boxes_.empty(); }

  Count count() const;
  bool contains(std::span<const Coord> point) const;
  /// Index of `rank` in the rank tuple; throws UnknownNameError.
  std::size_t rank_index(const std::string& rank) const;

  /// Per-rank minimum; empty region has no origin.
  std::vector<Coord> lower_corner() const;
  /// Per-rank [min, max] (strides dropped).
  Box bounding_box() const;
  Region translated(std::span<const Coord> offset) const;

  /// One box per line: `rank=lo..hi:stride` separated by spaces.
  std::string dump() const;

  bool operator==(const Region& other) const { return same_ranks(other) && boxes_ == other.boxes_; }

 private:
  // Shared so copies and set operations do not copy rank names.
  std::shared_ptr<const RankTuple> ranks_;
  std::vector<Box> boxes_;
};

Region unite(const Region& a, const Region& b);
Region intersect(const Region& a, const Region& b);
Region difference(const Region& a, const Region& b);

/// Re-merges boxes and sorts them; idempotent.
Region canonicalize(const Region& r);

/// All points in lexicographic order; throws LimitExceededError past `limit`.
std::vector<std::vector<Coord>> enumerate_points(const Region& r, Count limit);

struct AffineTerm {
  Coord coeff = 1;
  std::string rank;
  bool operator==(const AffineTerm&) const = default;
};

/// sum(coeff_i * index_i) + constant; at most two terms.
struct AffineExpr {
  std::vector<AffineTerm> terms;
  Coord constant = 0;

  static AffineExpr index(std::string rank) { return AffineExpr{{{1, std::move(rank)}}, 0}; }
  bool is_single_index() const { return terms.size() == 1 && terms[0].coeff == 1 && constant == 0; }
  bool mentions(const std::string& rank) const;
  bool operator==(const AffineExpr&) const = default;
};

/// Maps points over `domain` to points over `codomain`, one expression per
/// codomain rank. Each domain rank may feed at most one codomain expression,
/// which makes the image of a box a product of one-dimensional images.
class AffineRelation {
 public:
  AffineRelation(RankTuple domain, RankTuple codomain, std::vector<AffineExpr> exprs);

  const RankTuple& domain() const { return domain_; }
  const RankTuple& codomain() const { return codomain_; }
  const std::vector<AffineExpr>& exprs() const { return exprs_; }

  std::vector<Coord> apply(std::span<const Coord> point) const;

 private:
  friend Region image(const AffineRelation& rel, const Region& r);

  struct ResolvedTerm {
    Coord coeff;
    std::size_t index;
  };
  RankTuple domain_;
  RankTuple codomain_;
  std::vector<AffineExpr> exprs_;
  std::vector<std::vector<ResolvedTerm>> resolved_;
  Region empty_domain_;
  Region empty_image_;
};

/// Exact image {rel(x) : x in r}.
Region image(const AffineRelation& rel, const Region& r);

/// Exact one-dimensional image of a box of indices under one expression.
std::vector<StridedInterval> image_1d(const std::vector<std::pair<Coord, StridedInterval>>& terms,
                                      Coord constant);

}  // namespace fusedflow::geometry
