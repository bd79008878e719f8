// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Tolerances are fixed below.

#include <algorithm>
#include <bitset>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "fusedflow/check.hpp"
#include "fusedflow/fuzz.hpp"
#include "fusedflow/mapper.hpp"
#include "fusedflow/templates.hpp"

using namespace fusedflow;

namespace {

constexpr int kFuzzCases = 150;
const fuzz::Options kFuzz{8, 100000, 2, 3};
constexpr Count kOpLimit = 10'000'000;
/// Energy must agree after rounding to three decimals.
constexpr double kEnergyTolerance = 0.0005;
/// A budget counts as far below the fused minimum at no more than 60% of it.
constexpr double kFarBelow = 0.6;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& run) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = run();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::vector<fuzz::Case> fuzz_cases() {
  std::vector<fuzz::Case> out;
  for (int i = 1; i <= kFuzzCases; ++i) out.push_back(fuzz::random_case(static_cast<std::uint64_t>(i), kFuzz));
  return out;
}

Outcome oracle_equivalence(const std::vector<fuzz::Case>& cases) {
  Count recomputing = 0;
  for (const auto& c : cases) {
    auto ev = analysis::analyze(c.workload, c.mapping, c.arch);
    auto mt = metrics::compute_metrics(ev, c.workload, c.mapping, c.arch);
    auto sim = oracle::simulate(c.workload, c.mapping, c.arch, kOpLimit);
    if (auto mm = check::compare(ev, mt, sim, c.workload, c.arch)) {
      return {false, c.label + ": " + mm->describe()};
    }
    if (mt.total_recompute > 0) ++recomputing;
  }
  return {true, std::to_string(cases.size()) + " cases exact, " + std::to_string(recomputing) + " with recomputation"};
}

Outcome reuse_magnitude() {
  const Coord C = 2, H = 8, M = 64, K = 3;
  auto w = templates::build_chain({C, H, H, true}, {{templates::LayerKind::Conv, M, K, 1}});
  const auto& e = w.einsum(0);
  const std::string input = w.tensors_of(0).at(1);
  const std::vector<Coord> interior{1, 4, 4};
  const std::vector<Coord> corner{0, 0, 0};

  // Reference: walk the convolution loops directly.
  auto brute = [&](const std::vector<Coord>& pt) {
    Count n = 0;
    const Coord P = H - K + 1;
    for (Coord m = 0; m < M; ++m)
      for (Coord c = 0; c < C; ++c)
        for (Coord p = 0; p < P; ++p)
          for (Coord q = 0; q < P; ++q)
            for (Coord r = 0; r < K; ++r)
              for (Coord s = 0; s < K; ++s) n += (c == pt[0] && p + r == pt[1] && q + s == pt[2]);
    return n;
  };
  const Count a_in = workload::access_multiplicity(e, input, interior);
  const Count b_in = brute(interior);
  const Count a_corner = workload::access_multiplicity(e, input, corner);
  const Count b_corner = brute(corner);
  std::ostringstream os;
  os << "interior " << a_in << " (reference " << b_in << "), corner " << a_corner << " (reference " << b_corner << ")";
  return {a_in == 576 && b_in == 576 && a_corner == b_corner && a_corner == M, os.str()};
}

Outcome fc_no_overlap() {
  auto w = templates::named_template("fc_fc", {});
  auto a = mapper::default_study_architecture();
  mapper::MapspaceSpec s;
  s.max_partitions = 1;
  s.ladder = mapper::TileLadder::Divisors;
  // Every rank of the last layer, reductions included.
  s.ranks = w.last().op_ranks();
  s.levels = {a.levels[0].name, a.levels[1].name};
  auto ms = mapper::enumerate_mapspace(s, w, a);
  std::size_t single = 0;
  for (const auto& m : ms) {
    if (m.partitions.size() != 1) continue;
    ++single;
    auto tiles = analysis::infer_tiles(w, m);
    for (Count rc : analysis::recompute_ops(w, tiles)) {
      if (rc != 0) return {false, mapping::serialize_mapping(m) + " recomputes " + std::to_string(rc)};
    }
  }
  return {single > 0, std::to_string(single) + " single-partition mappings, all zero"};
}

std::map<Count, Count> min_occupancy_by_offchip(const std::vector<mapper::Evaluated>& pool) {
  // Staircase: smallest occupancy achieving at most each off-chip level.
  std::map<Count, Count> best;
  for (const auto& r : pool) {
    if (!r.metrics.feasible) continue;
    auto& v = best.try_emplace(r.metrics.offchip_words, r.metrics.onchip_words).first->second;
    v = std::min(v, r.metrics.onchip_words);
  }
  return best;
}

Count staircase_at(const std::map<Count, Count>& best, Count offchip) {
  Count v = -1;
  for (const auto& [off, occ] : best) {
    if (off > offchip) break;
    if (v < 0 || occ < v) v = occ;
  }
  return v;
}

Outcome per_tensor_dominance() {
  auto cs = mapper::case_study("per_tensor_retain", {{"C", 2}, {"H", 8}, {"M", 2}}, mapper::default_study_architecture());
  auto uni = min_occupancy_by_offchip(cs.pools.at("uniform"));
  auto per = min_occupancy_by_offchip(cs.pools.at("per_tensor"));
  std::set<Count> levels;
  for (const auto& [o, v] : uni) levels.insert(o);
  for (const auto& [o, v] : per) levels.insert(o);
  int strictly = 0;
  std::ostringstream os;
  for (Count off : levels) {
    const Count u = staircase_at(uni, off);
    const Count p = staircase_at(per, off);
    if (p < 0 && u >= 0) return {false, "per-tensor has no point at offchip " + std::to_string(off)};
    if (u >= 0 && p > u) {
      return {false, "offchip " + std::to_string(off) + ": per-tensor " + std::to_string(p) + " > uniform " +
                         std::to_string(u)};
    }
    if (u < 0 || p < u) {
      if (!strictly++) os << "e.g. offchip " << off << ": per-tensor " << p << " vs uniform " << u << "; ";
    }
  }
  os << strictly << " of " << levels.size() << " off-chip levels strictly better";
  return {strictly > 0, os.str()};
}

Outcome pipeline_latency(const std::vector<fuzz::Case>& cases) {
  using metrics::TileLatencies;
  for (std::size_t S = 1; S <= 4; ++S) {
    for (Count T = 1; T <= 10; ++T) {
      for (Count c = 1; c <= 5; ++c) {
        TileLatencies L(S, std::vector<Count>(static_cast<std::size_t>(T), c));
        const Count expect = (static_cast<Count>(S) + T - 1) * c;
        if (metrics::pipeline_latency_dp(L) != expect || metrics::pipeline_latency(L) != expect ||
            metrics::pipeline_latency_uniform(std::vector<Count>(S, c), T) != expect) {
          return {false, "uniform S=" + std::to_string(S) + " T=" + std::to_string(T) + " c=" + std::to_string(c)};
        }
      }
    }
  }
  std::mt19937 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Count> costs(std::uniform_int_distribution<std::size_t>(1, 4)(rng));
    for (auto& c : costs) c = std::uniform_int_distribution<Count>(0, 9)(rng);
    const Count T = std::uniform_int_distribution<Count>(1, 12)(rng);
    TileLatencies L;
    for (Count c : costs) L.push_back(std::vector<Count>(static_cast<std::size_t>(T), c));
    if (metrics::pipeline_latency_uniform(costs, T) != metrics::pipeline_latency_dp(L)) {
      return {false, "closed form disagrees with the recurrence"};
    }
    TileLatencies one{std::vector<Count>(static_cast<std::size_t>(T))};
    for (auto& c : one[0]) c = std::uniform_int_distribution<Count>(0, 9)(rng);
    if (metrics::pipeline_latency(one) != metrics::sequential_latency(one)) {
      return {false, "single-layer pipeline differs from sequential"};
    }
  }
  for (const auto& c : cases) {
    auto seq = c.mapping;
    seq.parallelism = mapping::Parallelism::Sequential;
    auto pipe = c.mapping;
    pipe.parallelism = mapping::Parallelism::Pipeline;
    auto ev = analysis::analyze(c.workload, seq, c.arch);
    const Count ps = metrics::pipeline_latency(ev.tile_cycles);
    const Count ss = metrics::sequential_latency(ev.tile_cycles);
    if (ps > ss || ps != metrics::pipeline_latency_dp(ev.tile_cycles)) {
      return {false, c.label + ": pipeline " + std::to_string(ps) + " vs sequential " + std::to_string(ss)};
    }
    const Count lp = metrics::evaluate(c.workload, pipe, c.arch).latency_cycles;
    const Count ls = metrics::compute_metrics(ev, c.workload, seq, c.arch).latency_cycles;
    if (lp > ls) return {false, c.label + ": pipelined mapping slower than sequential"};
  }
  return {true, "uniform grid, 200 random closed-form checks, " + std::to_string(cases.size()) + " fuzz cases"};
}

// Brute-force point sets over small domains, stored as bitsets.
using Bits = std::bitset<64>;

std::vector<geometry::StridedInterval> intervals_within(Coord extent) {
  std::set<geometry::StridedInterval> out;
  for (Coord lo = 0; lo < extent; ++lo)
    for (Coord st = 1; st < extent; ++st)
      for (Coord hi = lo; hi < extent; hi += st) out.insert(geometry::StridedInterval::make(lo, hi, st));
  return {out.begin(), out.end()};
}

Bits bits_1d(const geometry::StridedInterval& s) {
  Bits b;
  for (Coord v = s.lo; v <= s.hi; v += s.stride) b.set(static_cast<std::size_t>(v));
  return b;
}

Bits bits_region(const geometry::Region& r, Coord width) {
  Bits b;
  for (const auto& p : geometry::enumerate_points(r, 64)) {
    b.set(static_cast<std::size_t>(p.size() == 1 ? p[0] : p[0] * width + p[1]));
  }
  return b;
}

Bits bits_box(const geometry::Box& box, Coord width) {
  Bits b;
  const auto& x = box.dims[0];
  const auto& y = box.dims[1];
  for (Coord i = x.lo; i <= x.hi; i += x.stride)
    for (Coord j = y.lo; j <= y.hi; j += y.stride) b.set(static_cast<std::size_t>(i * width + j));
  return b;
}

/// Operations of each layer that contribute to the final output, found by
/// propagating the last layer's full operation space backwards. Strided
/// consumers can leave producer operations whose results are never read.
std::vector<Count> live_ops(const workload::FusionSet& w) {
  std::vector<Count> out(w.size());
  auto live = workload::operation_space(w.last());
  out.back() = live.count();
  for (std::size_t k = w.size() - 1; k > 0; --k) {
    std::string fmap;
    for (const auto& t : w.tensors()) {
      if (t.producer == static_cast<int>(k - 1) && t.consumer == static_cast<int>(k)) fmap = t.name;
    }
    auto needed = geometry::image(workload::data_relation(w.einsum(k), fmap), live);
    live = workload::producer_ops(needed, w.einsum(k - 1));
    out[k - 1] = live.count();
  }
  return out;
}

Outcome conservation_and_geometry(const std::vector<fuzz::Case>& cases) {
  using namespace geometry;
  int with_dead_ops = 0;
  for (const auto& c : cases) {
    auto ev = analysis::analyze(c.workload, c.mapping, c.arch);
    auto sim = oracle::simulate(c.workload, c.mapping, c.arch, kOpLimit);
    const auto live = live_ops(c.workload);
    bool dead = false;
    for (std::size_t k = 0; k < c.workload.size(); ++k) {
      Count executed = 0;
      for (const auto& row : ev.tiles.tiles) executed += row[k].ops.count();
      const Count space = workload::operation_space(c.workload.einsum(k)).count();
      const Count distinct = sim.executed_ops[k] - sim.recompute_ops[k];
      dead = dead || live[k] != space;
      auto where = [&] { return c.label + " layer " + std::to_string(k) + ": "; };
      if (ev.recompute[k] < 0) return {false, where() + "negative recomputation"};
      if (executed != live[k] + ev.recompute[k]) {
        return {false, where() + "executed " + std::to_string(executed) + " != live " + std::to_string(live[k]) +
                           " + recompute " + std::to_string(ev.recompute[k])};
      }
      if (executed != sim.executed_ops[k] || distinct != live[k]) {
        return {false, where() + "simulator executed " + std::to_string(sim.executed_ops[k]) + ", distinct " +
                           std::to_string(distinct)};
      }
      // Where every operation is live this is executed = |operation space| + recompute.
      if (live[k] == space && executed != space + ev.recompute[k]) return {false, where() + "not conserved"};
    }
    with_dead_ops += dead;
  }

  Count checks = 0;
  auto fail = [](const std::string& what) { return Outcome{false, what}; };
  // One dimension: every strided interval in [0, E) for E <= 6.
  for (Coord E = 1; E <= 6; ++E) {
    const auto iv = intervals_within(E);
    for (const auto& a : iv) {
      for (const auto& b : iv) {
        const Bits ba = bits_1d(a), bb = bits_1d(b);
        auto i = intersect(a, b);
        if ((i ? bits_1d(*i) : Bits()) != (ba & bb)) return fail("interval intersect");
        Bits d;
        for (const auto& s : subtract(a, b)) {
          if ((d & bits_1d(s)).any()) return fail("interval subtract overlaps");
          d |= bits_1d(s);
        }
        if (d != (ba & ~bb)) return fail("interval subtract");
        auto ra = Region::of_box({"X"}, Box{{a}});
        auto rb = Region::of_box({"X"}, Box{{b}});
        if (bits_region(unite(ra, rb), 0) != (ba | bb) || unite(ra, rb).count() != static_cast<Count>((ba | bb).count())) {
          return fail("1-D unite");
        }
        checks += 3;
      }
    }
  }
  // Two dimensions over a 6x6 grid: all pairs of boxes with unit stride, and
  // strided boxes against a fixed set of cutters.
  const auto iv6 = intervals_within(6);
  std::vector<StridedInterval> unit;
  for (const auto& s : iv6) {
    if (s.stride == 1) unit.push_back(s);
  }
  std::vector<Box> boxes;
  for (const auto& x : unit)
    for (const auto& y : unit) boxes.push_back(Box{{x, y}});
  std::vector<Box> strided;
  for (const auto& x : iv6)
    for (const auto& y : iv6) strided.push_back(Box{{x, y}});
  auto pair_check = [&](const Box& a, const Box& b) -> bool {
    const RankTuple ranks{"P", "Q"};
    auto ra = Region::of_box(ranks, a);
    auto rb = Region::of_box(ranks, b);
    const Bits ba = bits_box(a, 6), bb = bits_box(b, 6);
    auto u = unite(ra, rb);
    auto i = intersect(ra, rb);
    auto d = difference(ra, rb);
    checks += 3;
    return bits_region(u, 6) == (ba | bb) && bits_region(i, 6) == (ba & bb) && bits_region(d, 6) == (ba & ~bb) &&
           u.count() == static_cast<Count>((ba | bb).count()) && d.count() == static_cast<Count>((ba & ~bb).count());
  };
  for (const auto& a : boxes)
    for (const auto& b : boxes)
      if (!pair_check(a, b)) return fail("2-D set operation on unit boxes");
  for (const auto& a : strided)
    for (std::size_t j = 0; j < boxes.size(); j += 7)
      if (!pair_check(a, boxes[j]) || !pair_check(boxes[j], a)) return fail("2-D set operation on strided boxes");

  // Images of h = a*p + b*r + c over every strided 2-D box.
  for (Coord ca = 1; ca <= 3; ++ca) {
    for (Coord cb = 0; cb <= 3; ++cb) {
      for (Coord cc = 0; cc <= 1; ++cc) {
        AffineExpr ex{{{ca, "P"}}, cc};
        if (cb) ex.terms.push_back({cb, "R"});
        AffineRelation rel({"P", "R"}, {"H"}, {ex});
        for (const auto& box : strided) {
          Bits expect;
          for (Coord p = box.dims[0].lo; p <= box.dims[0].hi; p += box.dims[0].stride)
            for (Coord r = box.dims[1].lo; r <= box.dims[1].hi; r += box.dims[1].stride)
              expect.set(static_cast<std::size_t>(ca * p + cb * r + cc));
          auto img = image(rel, Region::of_box({"P", "R"}, box));
          ++checks;
          if (bits_region(img, 0) != expect || img.count() != static_cast<Count>(expect.count())) {
            return fail("image of " + Region::of_box({"P", "R"}, box).dump());
          }
        }
      }
    }
  }
  return {true, std::to_string(cases.size()) + " fuzz cases conserve operations (" + std::to_string(with_dead_ops) +
                    " with unread producer outputs, checked against live operations), " + std::to_string(checks) +
                    " geometry checks exact"};
}

Outcome energy_arithmetic() {
  auto w = workload::parse_workload(R"({"einsums": [{"name": "Conv",
    "output": {"tensor": "Output", "indices": ["m", "p"]},
    "inputs": [{"tensor": "Input", "indices": ["c", [[1, "p"], [1, "r"]]], "ranks": ["C", "H"]},
               {"tensor": "Filter", "indices": ["m", "c", "r"]}],
    "rank_shapes": {"M": 4, "P": 6, "C": 3, "H": 8, "R": 3}}]})");
  Architecture a;
  a.levels.push_back({"DRAM", std::nullopt, 8.0, 64.125, 70.5, 1, 0.0});
  a.levels.push_back({"GLB", std::nullopt, 32.0, 1.375, 2.0625, 16, 0.125});
  a.compute = {16, 1, 0.3, 1};
  mapping::Mapping m;
  for (const auto* t : {"Input", "Filter", "Output"}) m.retention.push_back({t, 0, "GLB"});

  // By hand, untiled with one compute unit and 216 operations:
  //   DRAM reads   Input 3*8 + Filter 4*3*3       = 60 words * 64.125
  //   DRAM updates Output 4*6                      = 24 words * 70.5
  //   GLB reads    one Input and one Filter word per operation = 432 * 1.375
  //   GLB writes   fills 24 + 36, Output updates 216 = 276 * 2.0625
  //   hops         one per delivered input word    = 432 * 0.125
  //   compute      216 * 0.3
  const double hand = 60 * 64.125 + 24 * 70.5 + 432 * 1.375 + 276 * 2.0625 + 432 * 0.125 + 216 * 0.3;
  const double expect = 6821.550;
  const double got = metrics::round_pj(metrics::evaluate(w, m, a).energy.total_pj);
  char buf[128];
  std::snprintf(buf, sizeof buf, "model %.3f pJ, hand %.3f pJ", got, hand);
  return {std::fabs(got - expect) < kEnergyTolerance && std::fabs(hand - expect) < kEnergyTolerance, buf};
}

Outcome fuse_or_not() {
  auto cs = mapper::case_study("fuse_or_not", {{"C", 2}, {"H", 10}, {"M", 2}}, mapper::default_study_architecture());
  const auto& fused = cs.pools.at("fused");
  Count min_off = -1;
  for (const auto& r : fused) {
    if (r.metrics.feasible && (min_off < 0 || r.metrics.offchip_words < min_off)) min_off = r.metrics.offchip_words;
  }
  // Fused capacity at the algorithmic minimum, and the smallest fused capacity.
  Count cap_at_min = -1, min_cap = -1;
  for (const auto& r : fused) {
    if (!r.metrics.feasible) continue;
    if (r.metrics.offchip_words == min_off && (cap_at_min < 0 || r.metrics.onchip_words < cap_at_min)) {
      cap_at_min = r.metrics.onchip_words;
    }
    if (min_cap < 0 || r.metrics.onchip_words < min_cap) min_cap = r.metrics.onchip_words;
  }
  auto lbl_within = [&](Count budget) {
    std::optional<Count> best;
    for (const auto& row : cs.rows) {
      if (row.schedule != "layer_by_layer" || row.occupancy_words > budget) continue;
      if (!best || row.offchip_words < *best) best = row.offchip_words;
    }
    return best;
  };
  const Count small = min_cap;
  const Count large = cap_at_min;
  auto f_small = mapper::best_offchip_within(fused, small);
  auto f_large = mapper::best_offchip_within(fused, large);
  auto l_small = lbl_within(small);
  auto l_large = lbl_within(large);
  std::ostringstream os;
  auto show = [](const std::optional<Count>& v) { return v ? std::to_string(*v) : std::string("none"); };
  os << "budget " << small << ": layer-by-layer " << show(l_small) << " vs fused " << show(f_small) << "; budget "
     << large << ": layer-by-layer " << show(l_large) << " vs fused " << show(f_large);
  const bool far_below = static_cast<double>(small) <= kFarBelow * static_cast<double>(large);
  if (!far_below) os << "; small budget not far below the fused minimum";
  const bool ok = far_below && l_small && f_small && *l_small < *f_small && l_large && f_large && *f_large < *l_large;
  return {ok, os.str()};
}

}  // namespace

int main() {
  const auto cases = fuzz_cases();
  report(1, "oracle equivalence", [&] { return oracle_equivalence(cases); });
  report(2, "reuse magnitude", reuse_magnitude);
  report(3, "fc+fc tiles do not overlap", fc_no_overlap);
  report(4, "per-tensor retention dominates uniform", per_tensor_dominance);
  report(5, "pipeline latency", [&] { return pipeline_latency(cases); });
  report(6, "conservation and geometry", [&] { return conservation_and_geometry(cases); });
  report(7, "energy arithmetic", energy_arithmetic);
  report(8, "fuse-or-not ordering", fuse_or_not);
  return failures == 0 ? 0 : 1;
}
