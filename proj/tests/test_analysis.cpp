// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fusedflow/analysis.hpp"
#include "fusedflow/oracle.hpp"
#include "fusedflow/templates.hpp"

using namespace fusedflow;
using namespace fusedflow::analysis;
using geometry::Box;
using geometry::StridedInterval;

namespace {

std::string slurp(const std::string& name) {
  std::ifstream in(std::string(FUSEDFLOW_SAMPLES) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

mapping::Mapping retain_all(const workload::FusionSet& w, int depth, const std::string& level) {
  mapping::Mapping m;
  for (const auto& t : w.tensors()) {
    const bool intermediate = t.role == workload::TensorRole::Intermediate;
    m.retention.push_back({t.name, depth, intermediate && level == "DRAM" ? "GLB" : level});
  }
  return m;
}

Count executed(const TileAnalysis& t, std::size_t layer) {
  Count n = 0;
  for (const auto& row : t.tiles) n += row[layer].ops.count();
  return n;
}

struct ConvConv {
  workload::FusionSet w = workload::parse_workload(slurp("conv_conv.workload.json"));
  Architecture a = parse_architecture(slurp("two_level.arch.json"));
};

}  // namespace

TEST_CASE("one conv tile: deliveries and chain fills") {
  auto w = workload::parse_workload(slurp("conv1d.workload.json"));
  auto a = parse_architecture(slurp("two_level.arch.json"));
  const auto& e = w.einsum(0);
  // M, P, C, R with p in [3,5]: needs input rows 3..7 over 3 channels.
  auto ops = geometry::Region::of_box(e.op_ranks(), Box{{StridedInterval::make(0, 3), StridedInterval::make(3, 5),
                                                         StridedInterval::make(0, 2), StridedInterval::make(0, 2)}});
  REQUIRE(ops.count() == 108);
  std::map<std::string, int> levels{{"Input", 0}, {"Filter", 0}, {"Output", 0}};
  auto nest = mapping::effective_nest(mapping::Mapping{}, e, a);
  auto tc = per_tile_counts(e, ops, geometry::Region(w.tensor("Output").dims), nest, a, levels);
  CHECK(tc.counts.compute_ops == 108);
  CHECK(tc.counts.get(1, "Input").reads == 108);
  CHECK(tc.counts.get(1, "Input").fills == 15);
  CHECK(tc.counts.get(0, "Input").reads == 15);
  CHECK(tc.counts.get(1, "Filter").fills == 36);
  CHECK(tc.counts.get(1, "Output").updates == 108);
  CHECK(tc.counts.get(0, "Output").updates == 12);
}

TEST_CASE("untiled single conv") {
  auto w = workload::parse_workload(slurp("conv1d.workload.json"));
  auto a = parse_architecture(slurp("two_level.arch.json"));
  auto m = retain_all(w, 0, "DRAM");
  auto ev = analyze(w, m, a);
  CHECK(ev.totals.compute_ops == 216);
  CHECK(ev.totals.get(1, "Input").fills == 24);
  CHECK(ev.totals.get(1, "Filter").fills == 36);
  CHECK(ev.totals.get(0, "Output").updates == 24);
  CHECK(ev.recompute == std::vector<Count>{0});

  auto sim = oracle::simulate(w, m, a, 1'000'000);
  CHECK(sim.compute_ops == 216);
  CHECK(sim.tallies.at({1, "Input"}).fills == 24);
  CHECK(sim.tallies.at({0, "Output"}).updates == 24);
}

TEST_CASE("zero-op tile counts nothing") {
  auto w = workload::parse_workload(slurp("conv1d.workload.json"));
  auto a = parse_architecture(slurp("two_level.arch.json"));
  const auto& e = w.einsum(0);
  std::map<std::string, int> levels{{"Input", 0}, {"Filter", 0}, {"Output", 0}};
  auto nest = mapping::effective_nest(mapping::Mapping{}, e, a);
  auto tc = per_tile_counts(e, geometry::Region(e.op_ranks()), geometry::Region(w.tensor("Output").dims), nest, a,
                            levels);
  tc.counts.normalize();
  CHECK(tc.counts == [&] {
    ActionCounts z(a.levels.size());
    z.normalize();
    return z;
  }());
}

TEST_CASE_FIXTURE(ConvConv, "no recomputation without partitions or with whole-tensor retention") {
  auto m = retain_all(w, 0, "GLB");
  CHECK(analyze(w, m, a).recompute == std::vector<Count>{0, 0});
  m.partitions = {{"P2", 4}, {"Q2", 4}};
  auto ev = analyze(w, m, a);
  CHECK(ev.recompute == std::vector<Count>{0, 0});
  CHECK(executed(ev.tiles, 0) == workload::operation_space(w.einsum(0)).count());
}

TEST_CASE_FIXTURE(ConvConv, "2-D tiling recomputes the evicted halo") {
  auto m = retain_all(w, 2, "GLB");
  m.partitions = {{"P2", 4}, {"Q2", 4}};
  auto ev = analyze(w, m, a);
  // Iterations (1,0) and (1,1) each rebuild a 2x4 patch of Fmap2 over 4
  // channels at 27 operations per point.
  CHECK(ev.recompute[0] == 2 * 2 * 4 * 4 * 27);
  CHECK(ev.recompute[1] == 0);
  CHECK(executed(ev.tiles, 0) == workload::operation_space(w.einsum(0)).count() + ev.recompute[0]);

  auto sim = oracle::simulate(w, m, a, 10'000'000);
  CHECK(sim.recompute_ops == ev.recompute);
}

TEST_CASE("fully connected chains never recompute") {
  auto w = templates::named_template("fc_fc", {});
  auto a = parse_architecture(slurp("two_level.arch.json"));
  for (const auto& r : w.last().op_ranks()) {
    for (Coord t = 1; t <= w.last().shape(r); ++t) {
      for (int d = 0; d <= 1; ++d) {
        auto m = retain_all(w, d, "GLB");
        m.partitions = {{r, t}};
        CAPTURE(r);
        CAPTURE(t);
        auto tiles = infer_tiles(w, m);
        auto rc = recompute_ops(w, tiles);
        CHECK(rc == std::vector<Count>(w.size(), 0));
      }
    }
  }
}

TEST_CASE_FIXTURE(ConvConv, "tile classes") {
  auto m = retain_all(w, 1, "GLB");
  for (auto& r : m.retention) {
    if (r.tensor.rfind("Filter", 0) == 0) r.depth = 0;
  }
  m.partitions = {{"P2", 2}};
  auto tiles = infer_tiles(w, m);
  REQUIRE(tiles.iterations.size() == 4);
  auto classes = dedupe_tiles(w, tiles);
  std::vector<Count> conv1;
  Count total = 0;
  for (const auto& c : classes) {
    total += c.multiplicity();
    if (c.einsum == 0) conv1.push_back(c.multiplicity());
  }
  CHECK(total == 8);
  CHECK(conv1 == std::vector<Count>{1, 3});

  m = retain_all(w, 0, "GLB");
  auto single = dedupe_tiles(w, infer_tiles(w, m));
  CHECK(single.size() == 2);
}

TEST_CASE("imperfect factorization splits off the edge tile") {
  auto w = workload::parse_workload(slurp("conv1d.workload.json"));
  mapping::Mapping m;
  m.partitions = {{"P", 4}};
  m.retention = {{"Input", 1, "GLB"}, {"Filter", 1, "GLB"}, {"Output", 1, "GLB"}};
  auto classes = dedupe_tiles(w, infer_tiles(w, m));
  REQUIRE(classes.size() == 2);
  CHECK(classes[0].multiplicity() == 1);
  CHECK(classes[1].multiplicity() == 1);
}

TEST_CASE_FIXTURE(ConvConv, "new data covers each tensor exactly once per retention window") {
  auto m = retain_all(w, 0, "GLB");
  m.partitions = {{"P2", 3}, {"Q2", 3}};
  auto tiles = infer_tiles(w, m);
  for (std::size_t k = 0; k < w.size(); ++k) {
    for (const auto& t : w.tensors_of(k)) {
      if (w.tensor(t).consumer != static_cast<int>(k)) continue;
      geometry::Region all(w.tensor(t).dims);
      Count sum = 0;
      for (const auto& row : tiles.tiles) {
        all = geometry::unite(all, row[k].new_data.at(t));
        sum += row[k].new_data.at(t).count();
      }
      auto accessed =
          geometry::image(workload::data_relation(w.einsum(k), t), workload::operation_space(w.einsum(k)));
      CAPTURE(t);
      CHECK(all.count() == accessed.count());
      CHECK(sum == accessed.count());
    }
  }
}

TEST_CASE_FIXTURE(ConvConv, "shallower retention never costs more fills or recomputation") {
  const std::vector<std::vector<mapping::Partition>> schedules = {
      {{"P2", 3}}, {{"P2", 4}, {"Q2", 4}}, {{"Q2", 3}, {"P2", 2}}, {{"M2", 2}, {"P2", 5}}};
  for (const auto& parts : schedules) {
    const int n = static_cast<int>(parts.size());
    for (const auto& t : w.tensors()) {
      Count prev_fills = -1;
      Count prev_rc = -1;
      for (int d = n; d >= 0; --d) {
        auto m = retain_all(w, n, "GLB");
        m.partitions = parts;
        for (auto& r : m.retention) {
          if (r.tensor == t.name) r.depth = d;
        }
        auto ev = analyze(w, m, a);
        const Count fills = ev.totals.get(1, t.name).fills;
        const Count rc = ev.recompute[0] + ev.recompute[1];
        CAPTURE(t.name);
        CAPTURE(d);
        if (prev_fills >= 0) {
          CHECK(fills <= prev_fills);
          CHECK(rc <= prev_rc);
        }
        prev_fills = fills;
        prev_rc = rc;
      }
    }
  }
}
