// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

// Serial vs OpenMP mapspace evaluation.

#include <benchmark/benchmark.h>

#include "fusedflow/mapper.hpp"
#include "fusedflow/templates.hpp"

using namespace fusedflow;

namespace {

struct Fixture {
  workload::FusionSet w = templates::named_template("conv_conv", {{"C", 2}, {"H", 8}, {"M", 2}});
  Architecture a = mapper::default_study_architecture();
  std::vector<mapping::Mapping> mappings;

  Fixture() {
    mapper::MapspaceSpec s;
    s.ladder = mapper::TileLadder::PowersOfTwo;
    s.ranks = {"P2", "Q2"};
    s.mode = mapper::RetentionMode::Uniform;
    s.parallelism = {mapping::Parallelism::Sequential, mapping::Parallelism::Pipeline};
    mappings = mapper::enumerate_mapspace(s, w, a);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_EvaluateSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(mapper::evaluate_all_serial(f.w, f.a, f.mappings));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.mappings.size()));
}

void BM_EvaluateParallel(benchmark::State& state) {
  const auto& f = fixture();
  const int jobs = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mapper::evaluate_all(f.w, f.a, f.mappings, jobs));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.mappings.size()));
}

}  // namespace

BENCHMARK(BM_EvaluateSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EvaluateParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
