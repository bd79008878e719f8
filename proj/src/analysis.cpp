// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusedflow/analysis.hpp"

#include <algorithm>
#include <functional>

namespace fusedflow::analysis {

using geometry::Box;
using geometry::StridedInterval;
using mapping::LoopKind;
using mapping::NestLoop;
using workload::TensorRole;

TensorCounts& TensorCounts::operator+=(const TensorCounts& o) {
  fills += o.fills;
  reads += o.reads;
  updates += o.updates;
  return *this;
}

TensorCounts ActionCounts::get(int level, const std::string& tensor) const {
  const auto& m = levels.at(static_cast<std::size_t>(level));
  auto it = m.find(tensor);
  return it == m.end() ? TensorCounts{} : it->second;
}

Count ActionCounts::level_words(int level) const {
  Count n = 0;
  for (const auto& [t, c] : levels.at(static_cast<std::size_t>(level))) n += c.fills + c.reads + c.updates;
  return n;
}

void ActionCounts::add(const ActionCounts& o, Count multiplicity) {
  if (levels.size() < o.levels.size()) {
    levels.resize(o.levels.size());
    hops.resize(o.levels.size(), 0);
  }
  for (std::size_t l = 0; l < o.levels.size(); ++l) {
    for (const auto& [t, c] : o.levels[l]) {
      auto& dst = levels[l][t];
      dst.fills += c.fills * multiplicity;
      dst.reads += c.reads * multiplicity;
      dst.updates += c.updates * multiplicity;
    }
    hops[l] += o.hops[l] * multiplicity;
  }
  compute_ops += o.compute_ops * multiplicity;
  compute_cycles += o.compute_cycles * multiplicity;
}

void ActionCounts::normalize() {
  for (auto& m : levels) std::erase_if(m, [](const auto& kv) { return kv.second == TensorCounts{}; });
}

std::map<std::string, int> retention_levels(const mapping::Mapping& m, const Architecture& a) {
  std::map<std::string, int> out;
  for (const auto& r : m.retention) out[r.tensor] = a.level_index(r.level);
  return out;
}

namespace {

Region empty_over(const workload::FusionSet& w, const std::string& tensor) {
  return Region(w.tensor(tensor).dims);
}

// Linear part of a relation applied to `point`.
std::vector<Coord> linear_offset(const geometry::AffineRelation& rel, const std::vector<Coord>& point) {
  auto at = rel.apply(point);
  auto zero = rel.apply(std::vector<Coord>(point.size(), 0));
  for (std::size_t k = 0; k < at.size(); ++k) at[k] -= zero[k];
  return at;
}

std::vector<Coord> negated(std::vector<Coord> v) {
  for (auto& x : v) x = -x;
  return v;
}

}  // namespace

TileAnalysis infer_tiles(const workload::FusionSet& w, const mapping::Mapping& m) {
  TileAnalysis ta;
  ta.iterations = mapping::iteration_space(m, w);
  const std::size_t n = ta.iterations.size();
  const std::size_t L = w.size();
  const std::string& out_name = w.last().output.tensor;

  std::vector<std::map<std::string, geometry::AffineRelation>> rels(L);
  for (std::size_t k = 0; k < L; ++k) {
    for (const auto& t : w.tensors_of(k)) rels[k].emplace(t, workload::data_relation(w.einsum(k), t));
  }
  // Layer whose accesses define each tensor's retained tile.
  std::map<std::string, std::size_t> owner;
  for (const auto& t : w.tensors()) owner[t.name] = t.consumer >= 0 ? static_cast<std::size_t>(t.consumer) : L - 1;

  std::map<std::string, Region> extent;
  for (const auto& t : w.tensors()) extent.emplace(t.name, w.tensor_extent(t.name));

  std::map<std::string, Region> buf;
  for (const auto& t : w.tensors()) {
    buf.emplace(t.name, empty_over(w, t.name));
    ta.buffer_after[t.name].reserve(n);
  }
  Region history = empty_over(w, out_name);
  ta.tiles.resize(n);
  ta.output_history.reserve(n);

  // Depth-d tiles depend only on the first d coordinates.
  std::map<int, std::pair<std::vector<Coord>, std::vector<Region>>> depth_ops;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& coord = ta.iterations[i];
    auto ops_at_depth = [&](int d) -> const std::vector<Region>& {
      std::vector<Coord> prefix(coord.begin(), coord.begin() + d);
      auto it = depth_ops.find(d);
      if (it != depth_ops.end() && it->second.first == prefix) return it->second.second;
      std::vector<Region> o(L);
      o[L - 1] = mapping::partition_tile(m, w, coord, static_cast<std::size_t>(d));
      for (std::size_t k = L - 1; k > 0; --k) {
        const auto& inter = w.einsum(k - 1).output.tensor;
        o[k - 1] = workload::producer_ops(geometry::image(rels[k].at(inter), o[k]), w.einsum(k - 1));
      }
      auto& slot = depth_ops[d];
      slot = {std::move(prefix), std::move(o)};
      return slot.second;
    };
    auto retained_tile = [&](const std::string& t) {
      int d = m.retention_of(t).depth;
      if (d == 0) return extent.at(t);
      std::size_t k = owner.at(t);
      return geometry::image(rels[k].at(t), ops_at_depth(d)[k]);
    };
    auto advance = [&](const std::string& t, const Region& data) {
      Region retained = geometry::intersect(buf.at(t), retained_tile(t));
      Region fresh = geometry::difference(data, retained);
      buf.at(t) = geometry::unite(retained, data);
      return fresh;
    };

    auto& row = ta.tiles[i];
    row.resize(L);
    Region ops = mapping::partition_tile(m, w, coord, m.partitions.size());
    for (std::size_t k = L; k-- > 0;) {
      const auto& e = w.einsum(k);
      auto& tile = row[k];
      tile.einsum = k;
      tile.iteration = i;
      tile.ops = ops;
      const auto& o = e.output.tensor;
      Region produced = geometry::image(rels[k].at(o), ops);
      if (k == L - 1) {
        tile.new_data[o] = advance(o, produced);
      } else {
        tile.new_data[o] = produced;
      }
      tile.data[o] = std::move(produced);
      Region next_ops;
      for (const auto& in : e.inputs) {
        Region data = geometry::image(rels[k].at(in.tensor), ops);
        Region fresh = advance(in.tensor, data);
        if (w.tensor(in.tensor).role == TensorRole::Intermediate) {
          next_ops = workload::producer_ops(fresh, w.einsum(k - 1));
        }
        tile.data[in.tensor] = std::move(data);
        tile.new_data[in.tensor] = std::move(fresh);
      }
      ops = std::move(next_ops);
    }
    ta.output_history.push_back(history);
    history = geometry::unite(history, row[L - 1].data.at(out_name));
    for (const auto& t : w.tensors()) ta.buffer_after[t.name].push_back(buf.at(t.name));
  }
  return ta;
}

std::vector<Count> recompute_ops(const workload::FusionSet& w, const TileAnalysis& tiles) {
  std::vector<Count> out(w.size(), 0);
  for (std::size_t k = 0; k < w.size(); ++k) {
    Region seen(w.einsum(k).op_ranks());
    Count executed = 0;
    for (const auto& row : tiles.tiles) {
      executed += row[k].ops.count();
      seen = geometry::unite(seen, row[k].ops);
    }
    out[k] = executed - seen.count();
  }
  return out;
}

namespace {

// Raw box coordinates; the rank tuple is implied by the slot.
void append_signature(std::string& sig, const Region& r) {
  const auto n = static_cast<Coord>(r.boxes().size());
  sig.append(reinterpret_cast<const char*>(&n), sizeof n);
  for (const auto& b : r.boxes()) {
    for (const auto& d : b.dims) {
      const Coord v[3] = {d.lo, d.hi, d.stride};
      sig.append(reinterpret_cast<const char*>(v), sizeof v);
    }
  }
}

}  // namespace

std::vector<TileClass> dedupe_tiles(const workload::FusionSet& w, const TileAnalysis& tiles) {
  std::vector<TileClass> classes;
  std::map<std::string, std::size_t> index;
  const std::size_t L = w.size();
  const auto& out_name = w.last().output.tensor;
  for (std::size_t k = 0; k < L; ++k) {
    const auto& e = w.einsum(k);
    std::map<std::string, geometry::AffineRelation> rels;
    for (const auto& t : w.tensors_of(k)) rels.emplace(t, workload::data_relation(e, t));
    for (std::size_t i = 0; i < tiles.tiles.size(); ++i) {
      const auto& tile = tiles.tiles[i][k];
      std::string sig = std::to_string(k) + "|";
      if (tile.ops.empty()) {
        sig += "empty";
      } else {
        auto lo = tile.ops.lower_corner();
        append_signature(sig, tile.ops.translated(negated(lo)));
        for (const auto& [t, fresh] : tile.new_data) {
          auto off = negated(linear_offset(rels.at(t), lo));
          append_signature(sig, fresh.translated(off));
        }
        if (k == L - 1) {
          auto off = negated(linear_offset(rels.at(out_name), lo));
          Region h = geometry::intersect(tiles.output_history[i], tile.data.at(out_name));
          append_signature(sig, h.translated(off));
        }
      }
      auto [it, inserted] = index.emplace(sig, classes.size());
      if (inserted) classes.push_back(TileClass{k, sig, {}});
      classes[it->second].iterations.push_back(i);
    }
  }
  return classes;
}

namespace {

// Operation chunks resident at `level`: the tile split by every loop placed
// above that level, in loop order. Empty chunks are dropped.
std::vector<Region> make_chunks(const Region& ops, const workload::RankTuple& ranks, const std::vector<NestLoop>& nest,
                                int level) {
  std::vector<const NestLoop*> prefix;
  for (const auto& l : nest) {
    if (l.level < level) prefix.push_back(&l);
  }
  std::vector<std::size_t> idx;
  for (const auto* l : prefix) {
    idx.push_back(static_cast<std::size_t>(std::find(ranks.begin(), ranks.end(), l->rank) - ranks.begin()));
  }
  Box bb = ops.bounding_box();
  std::vector<Region> out;
  std::function<void(std::size_t, Box&)> walk = [&](std::size_t j, Box& cur) {
    if (j == prefix.size()) {
      Region chunk = geometry::intersect(ops, Region::of_box(ranks, cur));
      if (!chunk.empty()) out.push_back(std::move(chunk));
      return;
    }
    const Coord s = prefix[j]->tile_size;
    const StridedInterval saved = cur.dims[idx[j]];
    for (Coord lo = saved.lo; lo <= saved.hi; lo += s) {
      cur.dims[idx[j]] = StridedInterval::make(lo, std::min(saved.hi, lo + s - 1));
      walk(j + 1, cur);
    }
    cur.dims[idx[j]] = saved;
  };
  walk(0, bb);
  return out;
}

constexpr Count kDeliveryPointLimit = Count{1} << 26;

// Multicast-aware deliveries to compute when the nest has spatial loops.
void spatial_deliveries(const workload::Einsum& e, const Region& ops, const std::vector<NestLoop>& nest,
                        int K, TileCounts& tc) {
  const auto ranks = e.op_ranks();
  std::vector<std::size_t> idx;
  for (const auto& l : nest) {
    idx.push_back(static_cast<std::size_t>(std::find(ranks.begin(), ranks.end(), l.rank) - ranks.begin()));
  }
  const auto lo = ops.lower_corner();
  std::vector<std::pair<std::string, geometry::AffineRelation>> rels;
  for (const auto& in : e.inputs) rels.emplace_back(in.tensor, workload::data_relation(e, in.tensor));
  std::vector<std::map<std::pair<std::vector<Coord>, std::vector<Coord>>, Coord>> farthest(rels.size());

  std::vector<Coord> start(ranks.size());
  std::vector<Coord> key;
  for (const auto& x : geometry::enumerate_points(ops, kDeliveryPointLimit)) {
    std::copy(lo.begin(), lo.end(), start.begin());
    key.clear();
    Coord unit = 0;
    for (std::size_t j = 0; j < nest.size(); ++j) {
      const std::size_t r = idx[j];
      const Coord c = (x[r] - start[r]) / nest[j].tile_size;
      start[r] += c * nest[j].tile_size;
      if (nest[j].kind == LoopKind::Spatial) unit = unit * nest[j].radix + c;
      else key.push_back(c);
    }
    for (std::size_t t = 0; t < rels.size(); ++t) {
      auto& slot = farthest[t][{key, rels[t].second.apply(x)}];
      slot = std::max(slot, unit + 1);
    }
  }
  for (std::size_t t = 0; t < rels.size(); ++t) {
    Count hops = 0;
    for (const auto& [k, h] : farthest[t]) hops += h;
    tc.counts.at(K, rels[t].first).reads += static_cast<Count>(farthest[t].size());
    tc.counts.hops[static_cast<std::size_t>(K)] += hops;
  }
}

}  // namespace

TileCounts per_tile_counts(const workload::Einsum& e, const Region& ops, const Region& output_history,
                           const std::vector<NestLoop>& nest, const Architecture& a,
                           const std::map<std::string, int>& levels) {
  const int K = a.innermost();
  const std::size_t nlev = a.levels.size();
  TileCounts tc;
  tc.counts = ActionCounts(nlev);
  tc.chunk_peak.assign(nlev, 0);
  tc.chunk_peak_per_tensor.assign(nlev, {});
  if (ops.empty()) return tc;
  const auto ranks = e.op_ranks();
  const Count n_ops = ops.count();
  const auto& out = e.output.tensor;

  for (int l = 1; l <= K; ++l) {
    auto chunks = make_chunks(ops, ranks, nest, l);
    std::vector<Count> footprint(chunks.size(), 0);
    for (const auto* p : e.projections()) {
      const auto& t = p->tensor;
      if (levels.at(t) >= l) continue;
      auto rel = workload::data_relation(e, t);
      std::vector<Region> D;
      D.reserve(chunks.size());
      Count peak = 0;
      for (std::size_t j = 0; j < chunks.size(); ++j) {
        D.push_back(geometry::image(rel, chunks[j]));
        footprint[j] += D.back().count();
        peak = std::max(peak, D.back().count());
      }
      tc.chunk_peak_per_tensor[static_cast<std::size_t>(l)][t] = peak;
      auto& here = tc.counts.at(l, t);
      auto& parent = tc.counts.at(l - 1, t);
      if (t == out) {
        Region written = output_history;
        Region prev(rel.codomain());
        for (const auto& d : D) {
          Count refill = geometry::intersect(geometry::difference(d, prev), written).count();
          here.fills += refill;
          parent.reads += refill;
          parent.updates += geometry::difference(prev, d).count();
          written = geometry::unite(written, d);
          prev = d;
        }
        parent.updates += prev.count();
      } else {
        for (std::size_t j = 0; j < D.size(); ++j) {
          Count f = j == 0 ? D[j].count() : geometry::difference(D[j], D[j - 1]).count();
          here.fills += f;
          parent.reads += f;
        }
      }
    }
    for (Count f : footprint) {
      tc.chunk_peak[static_cast<std::size_t>(l)] = std::max(tc.chunk_peak[static_cast<std::size_t>(l)], f);
    }
  }

  bool spatial = std::any_of(nest.begin(), nest.end(), [](const NestLoop& l) { return l.kind == LoopKind::Spatial; });
  if (spatial) {
    spatial_deliveries(e, ops, nest, K, tc);
  } else {
    for (const auto& in : e.inputs) {
      tc.counts.at(K, in.tensor).reads += n_ops;
      tc.counts.hops[static_cast<std::size_t>(K)] += n_ops;
    }
  }
  tc.counts.at(K, out).updates += n_ops;
  tc.counts.compute_ops = n_ops;
  tc.counts.compute_cycles = ceil_div(n_ops, mapping::spatial_units(nest) * a.compute.ops_per_cycle_per_unit);
  return tc;
}

Evaluation analyze(const workload::FusionSet& w, const mapping::Mapping& m, const Architecture& a) {
  mapping::require_valid(m, w, a);
  Evaluation ev;
  const auto levels = retention_levels(m, a);
  const std::size_t L = w.size();
  ev.tiles = infer_tiles(w, m);
  ev.classes = dedupe_tiles(w, ev.tiles);
  const std::size_t n = ev.tiles.iterations.size();
  const auto& out_name = w.last().output.tensor;

  std::vector<std::vector<NestLoop>> nests;
  for (std::size_t k = 0; k < L; ++k) nests.push_back(mapping::effective_nest(m, w.einsum(k), a));

  ev.totals = ActionCounts(a.levels.size());
  ev.class_of.assign(L, std::vector<std::size_t>(n, 0));
  ev.tile_cycles.assign(L, std::vector<Count>(n, 0));
  for (std::size_t c = 0; c < ev.classes.size(); ++c) {
    const auto& cls = ev.classes[c];
    const std::size_t k = cls.einsum;
    const std::size_t rep = cls.iterations.front();
    const auto& tile = ev.tiles.tiles[rep][k];
    const auto& o = w.einsum(k).output.tensor;
    Region history = k == L - 1 ? geometry::intersect(ev.tiles.output_history[rep], tile.data.at(o))
                                : Region(w.tensor(o).dims);
    ev.class_counts.push_back(per_tile_counts(w.einsum(k), tile.ops, history, nests[k], a, levels));
    ev.totals.add(ev.class_counts.back().counts, cls.multiplicity());
    for (std::size_t i : cls.iterations) {
      ev.class_of[k][i] = c;
      ev.tile_cycles[k][i] = ev.class_counts.back().counts.compute_cycles;
    }
  }

  // Traffic between retaining buffers and the backing store.
  for (const auto& t : w.tensors()) {
    const int lt = levels.at(t.name);
    if (lt == 0 || !t.is_backed()) continue;
    const std::size_t owner = t.consumer >= 0 ? static_cast<std::size_t>(t.consumer) : L - 1;
    const auto& after = ev.tiles.buffer_after.at(t.name);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& fresh = ev.tiles.tiles[i][owner].new_data.at(t.name);
      if (t.name != out_name) {
        ev.totals.at(lt, t.name).fills += fresh.count();
        ev.totals.at(0, t.name).reads += fresh.count();
        continue;
      }
      Count refetch = geometry::intersect(fresh, ev.tiles.output_history[i]).count();
      ev.totals.at(lt, t.name).fills += refetch;
      ev.totals.at(0, t.name).reads += refetch;
      Count kept = after[i].count() - fresh.count();
      Count before = i == 0 ? 0 : after[i - 1].count();
      ev.totals.at(0, t.name).updates += before - kept;
    }
    if (t.name == out_name && n > 0) ev.totals.at(0, t.name).updates += after[n - 1].count();
  }
  ev.totals.normalize();
  ev.recompute = recompute_ops(w, ev.tiles);
  return ev;
}

}  // namespace fusedflow::analysis
