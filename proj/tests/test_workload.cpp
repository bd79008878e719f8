// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fusedflow/workload.hpp"

using namespace fusedflow;
using namespace fusedflow::workload;
using geometry::Box;
using geometry::Region;
using geometry::StridedInterval;

namespace {

std::string conv_text(int H) {
  return R"({"einsums":[{"name":"Conv","output":{"tensor":"Output","indices":["m","p"]},
    "inputs":[{"tensor":"Input","indices":["c",[[1,"p"],[1,"r"]]],"ranks":["C","H"]},
              {"tensor":"Filter","indices":["m","c","r"]}],
    "rank_shapes":{"M":4,"P":6,"C":3,"H":)" +
         std::to_string(H) + R"(,"R":3}}]})";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("parse a single conv") {
  auto fs = parse_workload(conv_text(8));
  REQUIRE(fs.size() == 1);
  CHECK(fs.tensor("Input").role == TensorRole::ExternalInput);
  CHECK(fs.tensor("Filter").role == TensorRole::Filter);
  CHECK(fs.tensor("Output").role == TensorRole::ExternalOutput);
  CHECK(fs.tensor("Input").extents == std::vector<Coord>{3, 8});
  CHECK(fs.einsum(0).op_ranks() == RankTuple{"M", "P", "C", "R"});
  CHECK(fs.einsum(0).reduction_ranks() == RankTuple{"C", "R"});
}

TEST_CASE("halo shape too small") {
  CHECK_THROWS_AS(parse_workload(conv_text(7)), ShapeError);
  CHECK_NOTHROW(parse_workload(conv_text(9)));
}

TEST_CASE("syntax errors carry a position") {
  try {
    parse_workload("{\"einsums\": [");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.position() >= 0);
  }
  CHECK_THROWS_AS(parse_workload(R"({"einsums":[{"name":"A"}]})"), ParseError);
}

TEST_CASE("chain structure") {
  auto fs = parse_workload(read_file(FUSEDFLOW_SAMPLES "/conv_conv.workload.json"));
  CHECK(fs.size() == 2);
  CHECK(fs.tensor("Fmap2").role == TensorRole::Intermediate);
  CHECK(fs.tensor("Fmap2").producer == 0);
  CHECK(fs.tensor("Fmap2").consumer == 1);
  CHECK(fs.tensor("Filter2").role == TensorRole::Filter);
  CHECK(fs.tensor("Fmap3").role == TensorRole::ExternalOutput);
  CHECK(fs.einsum(1).projection("Fmap2").data_ranks == RankTuple{"M1", "P1", "Q1"});

  // Consumer reading past the producer's extent.
  std::string bad = R"({"einsums":[
    {"name":"A","output":{"tensor":"X","indices":["p"]},"inputs":[{"tensor":"I","indices":["p"]}],"rank_shapes":{"P":4}},
    {"name":"B","output":{"tensor":"Y","indices":["q"]},"inputs":[{"tensor":"X","indices":[[[1,"q"],[1,"r"]]]}],
     "rank_shapes":{"Q":4,"R":2}}]})";
  CHECK_THROWS_AS(parse_workload(bad), ShapeError);

  std::string unused = R"({"einsums":[
    {"name":"A","output":{"tensor":"X","indices":["p"]},"inputs":[{"tensor":"I","indices":["p"]}],"rank_shapes":{"P":4}},
    {"name":"B","output":{"tensor":"Y","indices":["p"]},"inputs":[{"tensor":"J","indices":["p"]}],"rank_shapes":{"P":4}}]})";
  CHECK_THROWS_AS(parse_workload(unused), ChainError);
}

TEST_CASE("reuse classes") {
  auto e = parse_workload(conv_text(8)).einsum(0);
  using RC = ReuseClass;
  CHECK(classify_reuse(e, "P") == std::map<std::string, RC>{{"Input", RC::Conv}, {"Output", RC::None}, {"Filter", RC::Full}});
  CHECK(classify_reuse(e, "C") == std::map<std::string, RC>{{"Input", RC::None}, {"Output", RC::Full}, {"Filter", RC::None}});
  CHECK(classify_reuse(e, "M") == std::map<std::string, RC>{{"Input", RC::Full}, {"Output", RC::None}, {"Filter", RC::None}});
  CHECK_THROWS_AS(classify_reuse(e, "Z"), UnknownNameError);
}

TEST_CASE("data relations") {
  auto e = parse_workload(conv_text(8)).einsum(0);
  std::vector<Coord> op{1, 2, 0, 2};  // m, p, c, r
  CHECK(data_relation(e, "Input").apply(op) == std::vector<Coord>{0, 4});
  CHECK(data_relation(e, "Output").apply(op) == std::vector<Coord>{1, 2});
  CHECK(data_relation(e, "Filter").apply(op) == std::vector<Coord>{1, 0, 2});
  CHECK_THROWS_AS(data_relation(e, "Nope"), UnknownNameError);
}

TEST_CASE("operation space") {
  auto e = parse_workload(conv_text(8)).einsum(0);
  CHECK(operation_space(e).count() == 216);
  e.rank_shapes["P"] = 1;
  CHECK(operation_space(e).count() == 36);
  for (auto& [r, s] : e.rank_shapes) s = 1;
  CHECK(operation_space(e).count() == 1);
}

TEST_CASE("producer ops") {
  auto e = parse_workload(conv_text(8)).einsum(0);
  auto needed = Region::of_box({"M", "P"}, Box{{StridedInterval::make(0, 3), StridedInterval::make(3, 5)}});
  auto ops = producer_ops(needed, e);
  CHECK(ops.count() == 108);
  auto one = Region::of_box({"M", "P"}, Box{{StridedInterval::point(2), StridedInterval::point(1)}});
  CHECK(producer_ops(one, e).count() == 9);
  CHECK(producer_ops(Region({"M", "P"}), e).empty());
  auto outside = Region::of_box({"M", "P"}, Box{{StridedInterval::make(0, 3), StridedInterval::make(3, 6)}});
  CHECK_THROWS_AS(producer_ops(outside, e), ShapeError);
}

TEST_CASE("access multiplicity") {
  auto e = parse_workload(conv_text(8)).einsum(0);
  std::vector<Coord> interior{1, 3};
  CHECK(access_multiplicity(e, "Input", interior) == 4 * 3);
  std::vector<Coord> corner{0, 0};
  CHECK(access_multiplicity(e, "Input", corner) == 4);
  std::vector<Coord> w{0, 0, 0};
  CHECK(access_multiplicity(e, "Filter", w) == 6);
}

TEST_CASE("round trip") {
  for (const char* f : {"/conv1d.workload.json", "/conv_conv.workload.json"}) {
    auto fs = parse_workload(read_file(std::string(FUSEDFLOW_SAMPLES) + f));
    auto again = parse_workload(serialize_workload(fs));
    CHECK(again == fs);
    CHECK(serialize_workload(again) == serialize_workload(fs));
  }
}
