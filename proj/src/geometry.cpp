// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusedflow/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace fusedflow::geometry {

namespace {

void check_same_ranks(const Region& a, const Region& b) {
  if (!a.same_ranks(b)) {
    throw RankMismatchError("region rank tuples differ");
  }
}

// Two disjoint intervals whose union is again a strided interval.
std::optional<StridedInterval> try_merge(const StridedInterval& a, const StridedInterval& b) {
  const StridedInterval& x = a.lo < b.lo ? a : b;
  const StridedInterval& y = a.lo < b.lo ? b : a;
  if (x.is_point() && y.is_point()) {
    if (y.lo == x.lo + 1) return StridedInterval{x.lo, y.lo, 1};
    return std::nullopt;
  }
  Coord s = x.is_point() ? y.stride : x.stride;
  if (!x.is_point() && !y.is_point() && x.stride != y.stride) return std::nullopt;
  if (x.hi + s == y.lo) return StridedInterval{x.lo, y.hi, s};
  return std::nullopt;
}

// Sort boxes and merge pairs that differ along exactly one rank, trying the
// last rank first, until no merge applies.
void merge_boxes(std::vector<Box>& boxes, std::size_t ndims) {
  bool changed = true;
  while (changed && boxes.size() > 1) {
    changed = false;
    for (std::size_t d = ndims; d-- > 0;) {
      auto key_less = [d](const Box& a, const Box& b) {
        for (std::size_t k = 0; k < a.dims.size(); ++k) {
          if (k == d) continue;
          if (a.dims[k] != b.dims[k]) return a.dims[k] < b.dims[k];
        }
        return a.dims[d].lo < b.dims[d].lo;
      };
      auto same_key = [d](const Box& a, const Box& b) {
        for (std::size_t k = 0; k < a.dims.size(); ++k) {
          if (k != d && a.dims[k] != b.dims[k]) return false;
        }
        return true;
      };
      std::sort(boxes.begin(), boxes.end(), key_less);
      std::vector<Box> out;
      out.reserve(boxes.size());
      for (auto& b : boxes) {
        if (!out.empty() && same_key(out.back(), b)) {
          if (auto m = try_merge(out.back().dims[d], b.dims[d])) {
            out.back().dims[d] = *m;
            changed = true;
            continue;
          }
        }
        out.push_back(std::move(b));
      }
      boxes = std::move(out);
    }
  }
  std::sort(boxes.begin(), boxes.end());
}

// a \ b as disjoint boxes.
void subtract_box(const Box& a, const Box& b, std::vector<Box>& out) {
  const std::size_t n = a.dims.size();
  std::vector<StridedInterval> inter(n);
  for (std::size_t d = 0; d < n; ++d) {
    auto i = intersect(a.dims[d], b.dims[d]);
    if (!i) {
      out.push_back(a);
      return;
    }
    inter[d] = *i;
  }
  Box current = a;
  for (std::size_t d = 0; d < n; ++d) {
    for (const auto& frag : subtract(a.dims[d], b.dims[d])) {
      Box piece = current;
      piece.dims[d] = frag;
      out.push_back(std::move(piece));
    }
    current.dims[d] = inter[d];
  }
}

struct Progression {
  Coord first;
  Coord step;  // > 0
  Count count;
};

Progression scaled(Coord coeff, const StridedInterval& iv) {
  if (coeff > 0) return {coeff * iv.lo, coeff * iv.stride, iv.size()};
  return {coeff * iv.hi, -coeff * iv.stride, iv.size()};
}

StridedInterval to_interval(const Progression& p) {
  if (p.count == 1) return StridedInterval::point(p.first);
  return {p.first, p.first + (p.count - 1) * p.step, p.step};
}

std::vector<StridedInterval> disjoint_1d(std::vector<StridedInterval> pieces) {
  RankTuple one{"_"};
  Region acc(one);
  for (const auto& p : pieces) acc = unite(acc, Region::of_box(one, Box{{p}}));
  std::vector<StridedInterval> out;
  out.reserve(acc.boxes().size());
  for (const auto& b : acc.boxes()) out.push_back(b.dims[0]);
  return out;
}

}  // namespace

StridedInterval StridedInterval::make(Coord lo, Coord hi, Coord stride) {
  if (stride <= 0) throw Error("strided interval needs a positive stride");
  if (hi < lo) throw Error("strided interval needs lo <= hi");
  hi = lo + ((hi - lo) / stride) * stride;
  if (lo == hi) stride = 1;
  return {lo, hi, stride};
}

std::optional<StridedInterval> intersect(const StridedInterval& a, const StridedInterval& b) {
  Coord lo = std::max(a.lo, b.lo);
  Coord hi = std::min(a.hi, b.hi);
  if (lo > hi) return std::nullopt;
  // Smallest point of a that is >= lo, then walk a's lattice until it hits b's.
  Coord x = a.lo + ((lo - a.lo + a.stride - 1) / a.stride) * a.stride;
  Coord g = std::gcd(a.stride, b.stride);
  Coord l = a.stride / g * b.stride;
  for (Coord k = 0; k < b.stride / g; ++k, x += a.stride) {
    if (x > hi) return std::nullopt;
    if ((x - b.lo) % b.stride == 0) {
      Coord last = x + ((hi - x) / l) * l;
      return StridedInterval::make(x, last, l);
    }
  }
  return std::nullopt;
}

std::vector<StridedInterval> subtract(const StridedInterval& a, const StridedInterval& b) {
  auto inter = intersect(a, b);
  if (!inter) return {a};
  std::vector<StridedInterval> out;
  const Coord s = a.stride;
  if (inter->lo > a.lo) out.push_back(StridedInterval::make(a.lo, inter->lo - s, s));
  // Inside [inter.lo, inter.hi], a's points off inter's lattice.
  const Coord period = inter->is_point() ? s : inter->stride;
  for (Coord off = s; off < period; off += s) {
    Coord first = inter->lo + off;
    if (first > inter->hi) break;
    out.push_back(StridedInterval::make(first, inter->hi, period));
  }
  if (inter->hi < a.hi) out.push_back(StridedInterval::make(inter->hi + s, a.hi, s));
  std::sort(out.begin(), out.end());
  return out;
}

Count Box::size() const {
  Count n = 1;
  for (const auto& d : dims) n *= d.size();
  return n;
}

bool Box::contains(std::span<const Coord> point) const {
  for (std::size_t d = 0; d < dims.size(); ++d) {
    if (!dims[d].contains(point[d])) return false;
  }
  return true;
}

std::optional<Box> intersect(const Box& a, const Box& b) {
  Box out;
  out.dims.reserve(a.dims.size());
  for (std::size_t d = 0; d < a.dims.size(); ++d) {
    auto i = intersect(a.dims[d], b.dims[d]);
    if (!i) return std::nullopt;
    out.dims.push_back(*i);
  }
  return out;
}

Region Region::from_disjoint(RankTuple ranks, std::vector<Box> boxes) {
  return Region(std::move(ranks)).with_boxes(std::move(boxes));
}

Region Region::with_boxes(std::vector<Box> boxes) const {
  Region r;
  r.ranks_ = ranks_;
  const std::size_t n = rank_count();
  for (const auto& b : boxes) {
    if (b.dims.size() != n) throw RankMismatchError("box arity differs from rank tuple");
  }
  merge_boxes(boxes, n);
  r.boxes_ = std::move(boxes);
  return r;
}

const RankTuple& Region::ranks() const {
  static const RankTuple none;
  return ranks_ ? *ranks_ : none;
}

bool Region::same_ranks(const Region& other) const {
  return ranks_ == other.ranks_ || ranks() == other.ranks();
}

Region Region::from_boxes(RankTuple ranks, const std::vector<Box>& boxes) {
  Region acc(ranks);
  for (const auto& b : boxes) acc = unite(acc, of_box(ranks, b));
  return acc;
}

Region Region::of_box(RankTuple ranks, Box box) {
  if (box.dims.size() != ranks.size()) throw RankMismatchError("box arity differs from rank tuple");
  Region r(std::move(ranks));
  r.boxes_.push_back(std::move(box));
  return r;
}

Count Region::count() const {
  Count n = 0;
  for (const auto& b : boxes_) n += b.size();
  return n;
}

bool Region::contains(std::span<const Coord> point) const {
  return std::any_of(boxes_.begin(), boxes_.end(), [&](const Box& b) { return b.contains(point); });
}

std::size_t Region::rank_index(const std::string& rank) const {
  const auto& rs = ranks();
  auto it = std::find(rs.begin(), rs.end(), rank);
  if (it == rs.end()) throw UnknownNameError("rank " + rank + " not in region");
  return static_cast<std::size_t>(it - rs.begin());
}

std::vector<Coord> Region::lower_corner() const {
  std::vector<Coord> lo(rank_count(), 0);
  if (boxes_.empty()) return lo;
  for (std::size_t d = 0; d < rank_count(); ++d) {
    Coord m = boxes_[0].dims[d].lo;
    for (const auto& b : boxes_) m = std::min(m, b.dims[d].lo);
    lo[d] = m;
  }
  return lo;
}

Box Region::bounding_box() const {
  Box bb;
  if (boxes_.empty()) return bb;
  for (std::size_t d = 0; d < rank_count(); ++d) {
    Coord lo = boxes_[0].dims[d].lo;
    Coord hi = boxes_[0].dims[d].hi;
    for (const auto& b : boxes_) {
      lo = std::min(lo, b.dims[d].lo);
      hi = std::max(hi, b.dims[d].hi);
    }
    bb.dims.push_back({lo, hi, 1});
  }
  return bb;
}

Region Region::translated(std::span<const Coord> offset) const {
  Region r = *this;
  for (auto& b : r.boxes_) {
    for (std::size_t d = 0; d < b.dims.size(); ++d) {
      b.dims[d].lo += offset[d];
      b.dims[d].hi += offset[d];
    }
  }
  return r;
}

std::string Region::dump() const {
  std::ostringstream os;
  for (const auto& b : boxes_) {
    for (std::size_t d = 0; d < rank_count(); ++d) {
      if (d) os << ' ';
      os << ranks()[d] << '=' << b.dims[d].lo << ".." << b.dims[d].hi << ':' << b.dims[d].stride;
    }
    os << '\n';
  }
  return os.str();
}

Region unite(const Region& a, const Region& b) {
  check_same_ranks(a, b);
  if (a.empty()) return b;
  if (b.empty()) return a;
  std::vector<Box> boxes = a.boxes();
  Region extra = difference(b, a);
  boxes.insert(boxes.end(), extra.boxes().begin(), extra.boxes().end());
  return a.with_boxes(std::move(boxes));
}

Region intersect(const Region& a, const Region& b) {
  check_same_ranks(a, b);
  std::vector<Box> boxes;
  for (const auto& x : a.boxes()) {
    for (const auto& y : b.boxes()) {
      if (auto i = intersect(x, y)) boxes.push_back(std::move(*i));
    }
  }
  return a.with_boxes(std::move(boxes));
}

Region difference(const Region& a, const Region& b) {
  check_same_ranks(a, b);
  if (a.empty() || b.empty()) return a;
  std::vector<Box> current = a.boxes();
  std::vector<Box> next;
  for (const auto& y : b.boxes()) {
    next.clear();
    for (const auto& x : current) subtract_box(x, y, next);
    current.swap(next);
    if (current.empty()) break;
  }
  return a.with_boxes(std::move(current));
}

Region canonicalize(const Region& r) { return r.with_boxes(r.boxes()); }

std::vector<std::vector<Coord>> enumerate_points(const Region& r, Count limit) {
  if (r.count() > limit) {
    throw LimitExceededError("region has " + std::to_string(r.count()) + " points, limit " +
                             std::to_string(limit));
  }
  std::vector<std::vector<Coord>> pts;
  pts.reserve(static_cast<std::size_t>(r.count()));
  const std::size_t n = r.rank_count();
  for (const auto& b : r.boxes()) {
    std::vector<Coord> p(n);
    for (std::size_t d = 0; d < n; ++d) p[d] = b.dims[d].lo;
    if (n == 0) {
      pts.push_back(p);
      continue;
    }
    while (true) {
      pts.push_back(p);
      std::size_t d = n;
      while (d-- > 0) {
        p[d] += b.dims[d].stride;
        if (p[d] <= b.dims[d].hi) break;
        p[d] = b.dims[d].lo;
        if (d == 0) goto next_box;
      }
    }
  next_box:;
  }
  std::sort(pts.begin(), pts.end());
  return pts;
}

bool AffineExpr::mentions(const std::string& rank) const {
  return std::any_of(terms.begin(), terms.end(), [&](const AffineTerm& t) { return t.rank == rank; });
}

AffineRelation::AffineRelation(RankTuple domain, RankTuple codomain, std::vector<AffineExpr> exprs)
    : domain_(std::move(domain)),
      codomain_(std::move(codomain)),
      exprs_(std::move(exprs)),
      empty_domain_(domain_),
      empty_image_(codomain_) {
  if (exprs_.size() != codomain_.size()) throw RankMismatchError("one expression per codomain rank required");
  std::vector<int> used(domain_.size(), 0);
  for (const auto& e : exprs_) {
    if (e.terms.size() > 2) throw Error("affine expressions support at most two index terms");
    std::vector<ResolvedTerm> rt;
    for (const auto& t : e.terms) {
      auto it = std::find(domain_.begin(), domain_.end(), t.rank);
      if (it == domain_.end()) throw UnknownNameError("index " + t.rank + " is not a domain rank");
      if (t.coeff == 0) throw Error("affine coefficient must be nonzero");
      auto idx = static_cast<std::size_t>(it - domain_.begin());
      if (used[idx]++) throw Error("domain rank " + t.rank + " feeds more than one codomain coordinate");
      rt.push_back({t.coeff, idx});
    }
    resolved_.push_back(std::move(rt));
  }
}

std::vector<Coord> AffineRelation::apply(std::span<const Coord> point) const {
  std::vector<Coord> out(exprs_.size());
  for (std::size_t k = 0; k < exprs_.size(); ++k) {
    Coord v = exprs_[k].constant;
    for (const auto& t : resolved_[k]) v += t.coeff * point[t.index];
    out[k] = v;
  }
  return out;
}

std::vector<StridedInterval> image_1d(const std::vector<std::pair<Coord, StridedInterval>>& terms,
                                      Coord constant) {
  if (terms.empty()) return {StridedInterval::point(constant)};
  Progression u = scaled(terms[0].first, terms[0].second);
  u.first += constant;
  if (terms.size() == 1) return {to_interval(u)};
  Progression v = scaled(terms[1].first, terms[1].second);
  if (u.count == 1) return {to_interval({u.first + v.first, v.step, v.count})};
  if (v.count == 1) return {to_interval({u.first + v.first, u.step, u.count})};
  if (u.step > v.step) std::swap(u, v);
  // u.step <= v.step: the sumset is one progression when u covers v's gaps.
  if (v.step % u.step == 0 && u.count * u.step >= v.step) {
    Coord first = u.first + v.first;
    Coord last = u.first + (u.count - 1) * u.step + v.first + (v.count - 1) * v.step;
    return {StridedInterval::make(first, last, u.step)};
  }
  const Progression& rep = u.count <= v.count ? u : v;
  const Progression& base = u.count <= v.count ? v : u;
  std::vector<StridedInterval> pieces;
  pieces.reserve(static_cast<std::size_t>(rep.count));
  for (Count k = 0; k < rep.count; ++k) {
    Progression p = base;
    p.first += rep.first + k * rep.step;
    pieces.push_back(to_interval(p));
  }
  return disjoint_1d(std::move(pieces));
}

Region image(const AffineRelation& rel, const Region& r) {
  if (!r.same_ranks(rel.empty_domain_)) throw RankMismatchError("region ranks differ from relation domain");
  Region acc = rel.empty_image_;
  const std::size_t nout = rel.codomain_.size();
  std::vector<Box> pieces;
  for (const auto& b : r.boxes()) {
    std::vector<std::vector<StridedInterval>> per_dim(nout);
    for (std::size_t k = 0; k < nout; ++k) {
      std::vector<std::pair<Coord, StridedInterval>> terms;
      for (const auto& t : rel.resolved_[k]) terms.emplace_back(t.coeff, b.dims[t.index]);
      per_dim[k] = image_1d(terms, rel.exprs_[k].constant);
    }
    // Cartesian product; pieces of one box are disjoint by construction.
    std::vector<Box> prod{Box{}};
    for (std::size_t k = 0; k < nout; ++k) {
      std::vector<Box> next;
      next.reserve(prod.size() * per_dim[k].size());
      for (const auto& p : prod) {
        for (const auto& iv : per_dim[k]) {
          Box q = p;
          q.dims.push_back(iv);
          next.push_back(std::move(q));
        }
      }
      prod = std::move(next);
    }
    Region img = rel.empty_image_.with_boxes(std::move(prod));
    acc = unite(acc, img);
  }
  return acc;
}

}  // namespace fusedflow::geometry
