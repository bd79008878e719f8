// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusedflow/fuzz.hpp"

#include <algorithm>

#include "fusedflow/templates.hpp"

namespace fusedflow::fuzz {

using templates::LayerKind;
using templates::LayerSpec;

namespace {

Coord uniform(std::mt19937_64& rng, Coord lo, Coord hi) {
  return std::uniform_int_distribution<Coord>(lo, hi)(rng);
}

bool chance(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

Count total_ops(const workload::FusionSet& w) {
  Count n = 0;
  for (const auto& e : w.einsums()) n += workload::operation_space(e).count();
  return n;
}

}  // namespace

workload::FusionSet random_fusion_set(std::mt19937_64& rng, const Options& opt) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int layers = static_cast<int>(uniform(rng, opt.min_layers, opt.max_layers));
    templates::InputSpec in;
    std::vector<LayerSpec> specs;
    if (chance(rng, 0.25)) {
      in = {uniform(rng, 1, opt.max_shape), uniform(rng, 1, std::min<Coord>(4, opt.max_shape)), 1, false};
      for (int k = 0; k < layers; ++k) specs.push_back({LayerKind::Fc, uniform(rng, 1, opt.max_shape), 1, 1});
    } else {
      in.two_d = chance(rng, 0.5);
      in.channels = uniform(rng, 1, opt.max_shape);
      // Room for the kernels so the last layer keeps a nontrivial extent.
      const Coord hi = opt.max_shape + 2 * layers;
      in.height = uniform(rng, std::min<Coord>(4, opt.max_shape), hi);
      in.width = in.two_d ? uniform(rng, std::min<Coord>(4, opt.max_shape), hi) : 1;
      Coord h = in.height;
      Coord wd = in.width;
      bool ok = true;
      for (int k = 0; k < layers && ok; ++k) {
        LayerSpec s;
        auto pick = uniform(rng, 0, 2);
        s.kind = pick == 0 ? LayerKind::Conv : pick == 1 ? LayerKind::Pwise : LayerKind::Dwise;
        s.out_channels = uniform(rng, 1, opt.max_shape);
        s.kernel = s.kind == LayerKind::Pwise ? 1 : (chance(rng, 0.6) ? 3 : uniform(rng, 1, 3));
        s.stride = chance(rng, 0.15) ? 2 : 1;
        Coord lim = in.two_d ? std::min(h, wd) : h;
        if (s.kernel > lim) s.kernel = lim;
        Coord p = (h - s.kernel) / s.stride + 1;
        Coord q = in.two_d ? (wd - s.kernel) / s.stride + 1 : 1;
        if (p < 1 || q < 1) ok = false;
        h = p;
        wd = q;
        specs.push_back(s);
      }
      if (!ok) continue;
    }
    try {
      auto w = templates::build_chain(in, specs);
      if (total_ops(w) <= opt.max_ops) return w;
    } catch (const ShapeError&) {
    }
  }
  throw Error("could not generate a fusion set within the operation bound");
}

Architecture random_architecture(std::mt19937_64& rng) {
  Architecture a;
  const int onchip = static_cast<int>(uniform(rng, 1, 2));
  auto energy = [&](Coord lo, Coord hi) { return static_cast<double>(uniform(rng, lo, hi)) / 4.0; };
  a.levels.push_back({"DRAM", std::nullopt, static_cast<double>(uniform(rng, 1, 8)), energy(200, 400),
                      energy(200, 400), 1, 0.0});
  for (int l = 1; l <= onchip; ++l) {
    BufferLevel b;
    b.name = l == onchip ? "L" + std::to_string(l) + "buf" : "L" + std::to_string(l);
    b.bandwidth = static_cast<double>(uniform(rng, 4, 64));
    b.read_energy = energy(1, 40);
    b.write_energy = energy(1, 40);
    b.fanout = l == onchip ? static_cast<int>(uniform(rng, 1, 16)) : 1;
    b.hop_energy = l == onchip ? energy(0, 4) : 0.0;
    a.levels.push_back(b);
  }
  a.compute.units = 16;
  a.compute.ops_per_cycle_per_unit = static_cast<int>(uniform(rng, 1, 2));
  a.compute.op_energy = energy(1, 8);
  a.compute.pipeline_stages = 3;
  return a;
}

mapping::Mapping random_mapping(std::mt19937_64& rng, const workload::FusionSet& w, const Architecture& a) {
  using mapping::LoopKind;
  mapping::Mapping m;
  const auto& last = w.last();
  const auto ranks = last.op_ranks();
  const int K = a.innermost();

  std::vector<std::string> spatial_ranks;
  for (const auto& r : ranks) {
    if (r[0] == 'P' || r[0] == 'Q') spatial_ranks.push_back(r);
  }
  auto small_tile = [&](Coord limit) {
    return chance(rng, 0.7) ? uniform(rng, 1, std::max<Coord>(1, limit / 2)) : uniform(rng, 1, limit);
  };
  const auto parts = uniform(rng, 0, 3);
  std::map<std::string, Coord> size;
  if (spatial_ranks.size() >= 2 && chance(rng, 0.35)) {
    // Row-major 2-D tiling, the classic source of halo recomputation.
    for (const auto& r : spatial_ranks) {
      const Coord t = small_tile(last.shape(r));
      m.partitions.push_back({r, t});
      size[r] = t;
    }
  }
  for (Coord j = 0; j < parts; ++j) {
    const auto& pool = !spatial_ranks.empty() && chance(rng, 0.6) ? spatial_ranks : ranks;
    const auto& r = pool[static_cast<std::size_t>(uniform(rng, 0, static_cast<Coord>(pool.size()) - 1))];
    Coord limit = size.count(r) ? size[r] - 1 : last.shape(r);
    if (limit < 1) continue;
    const Coord t = small_tile(limit);
    m.partitions.push_back({r, t});
    size[r] = t;
  }
  m.parallelism = chance(rng, 0.3) ? mapping::Parallelism::Pipeline : mapping::Parallelism::Sequential;
  const int n = static_cast<int>(m.partitions.size());
  for (const auto& t : w.tensors()) {
    const int lo = t.is_backed() ? 0 : 1;
    const int lvl = K >= lo ? static_cast<int>(uniform(rng, lo, K)) : 0;
    int depth = static_cast<int>(uniform(rng, 0, n));
    // Deep intermediate retention is what produces recomputation.
    if (!t.is_backed() && chance(rng, 0.5)) depth = n;
    m.retention.push_back({t.name, depth, a.level(lvl).name});
  }
  for (const auto& e : w.einsums()) {
    if (K < 1 || chance(rng, 0.4)) continue;
    std::vector<mapping::IntraLoop> nest;
    const auto er = e.op_ranks();
    const auto loops = uniform(rng, 1, 3);
    int level = 1;
    std::map<std::string, bool> spatial;
    for (Coord j = 0; j < loops; ++j) {
      level = static_cast<int>(uniform(rng, level, K));
      const auto& r = er[static_cast<std::size_t>(uniform(rng, 0, static_cast<Coord>(er.size()) - 1))];
      mapping::IntraLoop l{r, uniform(rng, 1, e.shape(r)), LoopKind::Temporal, a.level(level).name};
      if (level == K && !spatial[r] && chance(rng, 0.4)) {
        l.kind = LoopKind::Spatial;
        spatial[r] = true;
      }
      nest.push_back(l);
    }
    m.intra[e.name] = nest;
  }
  if (!mapping::validate_mapping(m, w, a).empty()) {
    for (auto& [name, nest] : m.intra) {
      for (auto& l : nest) l.kind = LoopKind::Temporal;
    }
  }
  if (!mapping::validate_mapping(m, w, a).empty()) m.parallelism = mapping::Parallelism::Sequential;
  if (!mapping::validate_mapping(m, w, a).empty()) m.intra.clear();
  mapping::require_valid(m, w, a);
  return m;
}

Case random_case(std::uint64_t seed, const Options& opt) {
  std::mt19937_64 rng(seed);
  auto w = random_fusion_set(rng, opt);
  auto a = random_architecture(rng);
  auto m = random_mapping(rng, w, a);
  std::string label = "seed " + std::to_string(seed) + ":";
  for (const auto& e : w.einsums()) label += " " + e.name;
  return Case{std::move(w), std::move(a), std::move(m), std::move(label)};
}

}  // namespace fusedflow::fuzz
