// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fusedflow/metrics.hpp"
#include "json.hpp"

using namespace fusedflow;
using namespace fusedflow::metrics;

namespace {

std::string slurp(const std::string& name) {
  std::ifstream in(std::string(FUSEDFLOW_SAMPLES) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Architecture one_level(double bandwidth) {
  Architecture a;
  a.levels.push_back({"DRAM", std::nullopt, bandwidth, 1.0, 0.0, 1, 0.0});
  a.compute.op_energy = 0.5;
  return a;
}

mapping::Mapping retain_all(const workload::FusionSet& w, int depth) {
  mapping::Mapping m;
  for (const auto& t : w.tensors()) m.retention.push_back({t.name, depth, "GLB"});
  return m;
}

}  // namespace

TEST_CASE("sequential latency") {
  CHECK(sequential_latency({{10, 10}, {5, 5}}) == 30);
  CHECK(sequential_latency({{7}}) == 7);
  CHECK(sequential_latency({{12, 10}, {5, 5}}) == 32);
}

TEST_CASE("pipeline latency") {
  CHECK(pipeline_latency({{3, 1, 1}, {1, 1, 1}}) == 6);
  CHECK(pipeline_latency({{1, 1, 1}, {1, 1, 1}}) == 4);
  CHECK(pipeline_latency({{4, 2, 9}}) == 15);
  CHECK(pipeline_latency({}) == 0);
  CHECK(pipeline_latency_uniform({1, 1}, 3) == 4);
  CHECK(pipeline_latency_uniform({5, 5, 5}, 4) == (3 + 4 - 1) * 5);
}

TEST_CASE("pipeline latency matches the recurrence") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const auto S = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    const auto n = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    // Few distinct columns so runs actually form.
    std::vector<std::vector<Count>> cols(3, std::vector<Count>(S));
    for (auto& c : cols) {
      for (auto& v : c) v = std::uniform_int_distribution<Count>(0, 9)(rng);
    }
    TileLatencies L(S, std::vector<Count>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = cols[std::uniform_int_distribution<std::size_t>(0, 2)(rng)];
      for (std::size_t k = 0; k < S; ++k) L[k][i] = c[k];
    }
    CAPTURE(trial);
    CHECK(pipeline_latency(L) == pipeline_latency_dp(L));
    CHECK(pipeline_latency(L) <= sequential_latency(L));
    TileLatencies U(S, std::vector<Count>(n));
    std::vector<Count> stage(S);
    for (std::size_t k = 0; k < S; ++k) {
      stage[k] = cols[0][k];
      std::fill(U[k].begin(), U[k].end(), stage[k]);
    }
    CHECK(pipeline_latency_uniform(stage, static_cast<Count>(n)) == pipeline_latency_dp(U));
  }
}

TEST_CASE("memory latency") {
  auto a = one_level(4);
  analysis::ActionCounts c(1);
  c.at(0, "X").reads = 1000;
  CHECK(memory_latency(c, a) == std::vector<Count>{250});
  CHECK(memory_latency(analysis::ActionCounts(1), a) == std::vector<Count>{0});
  a.levels[0].bandwidth = 3;
  analysis::ActionCounts ten(1);
  ten.at(0, "X").fills = 6;
  ten.at(0, "Y").updates = 4;
  CHECK(memory_latency(ten, a) == std::vector<Count>{4});
}

TEST_CASE("energy") {
  auto a = one_level(1);
  analysis::ActionCounts c(1);
  c.at(0, "X").reads = 100;
  c.compute_ops = 50;
  auto e = energy(c, a);
  CHECK(e.total_pj == doctest::Approx(125.0));
  CHECK(e.breakdown.at("DRAM.read") == doctest::Approx(100.0));
  CHECK(e.breakdown.at("compute") == doctest::Approx(25.0));
  CHECK(energy(analysis::ActionCounts(1), a).total_pj == 0.0);
  CHECK(round_pj(1.23456) == doctest::Approx(1.235));
}

TEST_CASE("multicast and hops on a spatial loop") {
  auto w = workload::parse_workload(R"({"einsums": [{"name": "Conv",
    "output": {"tensor": "Output", "indices": ["m", "p"]},
    "inputs": [{"tensor": "Input", "indices": ["c", [[1, "p"], [1, "r"]]], "ranks": ["C", "H"]},
               {"tensor": "Filter", "indices": ["m", "c", "r"]}],
    "rank_shapes": {"M": 1, "P": 4, "C": 1, "H": 4, "R": 1}}]})");
  auto a = parse_architecture(slurp("two_level.arch.json"));
  a.levels[1].fanout = 4;
  mapping::Mapping m;
  m.retention = {{"Input", 0, "DRAM"}, {"Filter", 0, "DRAM"}, {"Output", 0, "DRAM"}};
  m.intra["Conv"] = {{"P", 1, mapping::LoopKind::Spatial, "GLB"}};
  auto ev = analysis::analyze(w, m, a);
  CHECK(ev.totals.get(1, "Filter").reads == 1);
  CHECK(ev.totals.get(1, "Input").reads == 4);
  // Filter reaches every unit (4 hops); input word j goes to unit j.
  CHECK(ev.totals.hops[1] == 4 + (1 + 2 + 3 + 4));
  CHECK(ev.tile_cycles[0][0] == 1);
}

TEST_CASE("occupancy, off-chip traffic and the report") {
  auto w = workload::parse_workload(slurp("conv_conv.workload.json"));
  auto a = parse_architecture(slurp("two_level.arch.json"));
  auto m = retain_all(w, 0);
  auto mt = evaluate(w, m, a);
  CHECK(mt.occupancy.per_tensor[1].at("Fmap2") == 4 * 10 * 10);
  CHECK(mt.offchip_words == 3 * 12 * 12 + 4 * 3 * 9 + 4 * 4 * 9 + 4 * 8 * 8);
  CHECK(mt.total_recompute == 0);
  CHECK(mt.feasible);

  Count mem = 0;
  for (Count c : mt.memory_cycles) mem = std::max(mem, c);
  CHECK(mt.latency_cycles == std::max(mt.compute_cycles, mem));

  auto doc = nlohmann::json::parse(report_json(mt, w, a));
  CHECK(doc.at("feasible") == true);
  CHECK(doc.at("offchip_words") == mt.offchip_words);
  CHECK(doc.at("occupancy").at("GLB").at("per_tensor").at("Fmap2") == 400);
  CHECK(doc.at("energy").at("total").get<double>() == doctest::Approx(mt.energy.total_pj).epsilon(1e-6));
  CHECK(!doc.contains("capacity_violations"));

  a.levels[1].capacity = 100;
  auto tight = evaluate(w, m, a);
  CHECK(!tight.feasible);
  CHECK(nlohmann::json::parse(report_json(tight, w, a)).contains("capacity_violations"));
}

TEST_CASE("deeper retention never needs more capacity") {
  auto w = workload::parse_workload(slurp("conv_conv.workload.json"));
  auto a = parse_architecture(slurp("two_level.arch.json"));
  for (const auto& t : w.tensors()) {
    Count prev = -1;
    for (int d = 2; d >= 0; --d) {
      auto m = retain_all(w, 2);
      m.partitions = {{"P2", 3}, {"Q2", 4}};
      for (auto& r : m.retention) {
        if (r.tensor == t.name) r.depth = d;
      }
      const Count occ = evaluate(w, m, a).occupancy.per_level[1];
      CAPTURE(t.name);
      CAPTURE(d);
      if (prev >= 0) CHECK(occ >= prev);
      prev = occ;
    }
  }
}
