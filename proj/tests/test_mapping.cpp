// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fusedflow/mapping.hpp"

using namespace fusedflow;
using namespace fusedflow::mapping;

namespace {

std::string slurp(const std::string& name) {
  std::ifstream in(std::string(FUSEDFLOW_SAMPLES) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Fixture {
  workload::FusionSet w = workload::parse_workload(slurp("conv_conv.workload.json"));
  Architecture a = parse_architecture(slurp("two_level.arch.json"));
  Mapping m = parse_mapping(slurp("conv_conv.mapping.json"));
};

std::vector<RetentionChoice> all_on_chip(int depth) {
  std::vector<RetentionChoice> r;
  for (const char* t : {"Fmap1", "Filter1", "Fmap2", "Filter2", "Fmap3"}) r.push_back({t, depth, "GLB"});
  return r;
}

}  // namespace

TEST_CASE_FIXTURE(Fixture, "sample mapping is valid") {
  CHECK(validate_mapping(m, w, a).empty());
  CHECK(m.partitions.size() == 2);
  CHECK(m.retention_of("Fmap2").depth == 1);
}

TEST_CASE_FIXTURE(Fixture, "iteration space") {
  Mapping p;
  p.partitions = {{"P2", 3}};
  p.retention = all_on_chip(0);
  CHECK(iteration_space(p, w).size() == 3);  // P2 = 8

  p.partitions = {{"P2", 4}};
  CHECK(iteration_space(p, w) == std::vector<std::vector<Coord>>{{0}, {1}});

  p.partitions = {{"P2", 5}};
  auto it = iteration_space(p, w);
  REQUIRE(it.size() == 2);
  CHECK(partition_tile(p, w, it[1], 1).count() == 3 * 4 * 8 * 4 * 3 * 3);  // P2 in [5,7]

  p.partitions = {{"P2", 4}, {"Q2", 4}};
  CHECK(iteration_space(p, w) == std::vector<std::vector<Coord>>{{0, 0}, {0, 1}, {1, 0}, {1, 1}});

  p.partitions = {};
  CHECK(iteration_space(p, w) == std::vector<std::vector<Coord>>{{}});
}

TEST_CASE_FIXTURE(Fixture, "nested imperfect partitions skip empty tiles") {
  Mapping p;
  p.partitions = {{"P2", 5}, {"P2", 2}};
  p.retention = all_on_chip(0);
  CHECK(partition_trips(p, w) == std::vector<Coord>{2, 3});
  // Outer tile 1 covers P2 in [5,7]; its inner tiles are [5,6] and [7,7].
  CHECK(iteration_space(p, w).size() == 5);
}

TEST_CASE_FIXTURE(Fixture, "validation rules") {
  Mapping p;
  p.partitions = {{"P2", 4}, {"Q2", 4}};
  p.retention = all_on_chip(1);
  CHECK(validate_mapping(p, w, a).empty());

  auto off = p;
  off.retention[2].level = "DRAM";
  auto v = validate_mapping(off, w, a);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("intermediates exist only on-chip") != std::string::npos);

  auto deep = p;
  deep.retention[0].depth = 3;
  CHECK(validate_mapping(deep, w, a).size() == 1);

  auto wrong_rank = p;
  wrong_rank.partitions[0].rank = "P1";
  CHECK_FALSE(validate_mapping(wrong_rank, w, a).empty());

  auto missing = p;
  missing.retention.pop_back();
  CHECK_FALSE(validate_mapping(missing, w, a).empty());

  auto repeat = p;
  repeat.partitions.push_back({"P2", 4});
  CHECK_FALSE(validate_mapping(repeat, w, a).empty());

  auto wide = p;
  wide.intra["Conv1"] = {{"P1", 1, LoopKind::Spatial, "GLB"}, {"Q1", 2, LoopKind::Spatial, "GLB"}};
  CHECK_FALSE(validate_mapping(wide, w, a).empty());  // 10 * 5 units > 16

  auto pipe = p;
  pipe.parallelism = Parallelism::Pipeline;
  CHECK(validate_mapping(pipe, w, a).empty());
  pipe.intra["Conv1"] = {{"M1", 1, LoopKind::Spatial, "GLB"}};
  pipe.intra["Conv2"] = {{"P2", 1, LoopKind::Spatial, "GLB"}, {"M2", 2, LoopKind::Spatial, "GLB"}};
  CHECK_FALSE(validate_mapping(pipe, w, a).empty());  // 4 + 16 units > 16
}

TEST_CASE_FIXTURE(Fixture, "effective nest") {
  auto nest = effective_nest(m, w.einsum(1), a);
  REQUIRE(nest.size() == 1 + w.einsum(1).op_ranks().size());
  CHECK(nest[0].kind == LoopKind::Spatial);
  CHECK(nest[0].radix == 4);
  CHECK(spatial_units(nest) == 4);
  CHECK(spatial_units(effective_nest(m, w.einsum(0), a)) == 1);
}

TEST_CASE_FIXTURE(Fixture, "mapping round trip") {
  CHECK(parse_mapping(serialize_mapping(m)) == m);
  CHECK(parse_architecture(serialize_architecture(a)) == a);
  CHECK_THROWS_AS(parse_mapping(R"({"parallelism":"sideways"})"), ParseError);
  CHECK_THROWS_AS(parse_architecture(R"({"levels":[]})"), ParseError);
}
