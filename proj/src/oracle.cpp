// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusedflow/oracle.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace fusedflow::oracle {

namespace {

using Key = std::uint64_t;
using Set = std::unordered_set<Key>;
using Point = std::vector<Coord>;
using workload::TensorRole;

// Mixed-radix encoding of points inside a box [0, extent).
struct Codec {
  std::vector<Coord> extents;

  Key encode(const Point& p) const {
    Key k = 0;
    for (std::size_t d = 0; d < extents.size(); ++d) k = k * static_cast<Key>(extents[d]) + static_cast<Key>(p[d]);
    return k;
  }
  Point decode(Key k) const {
    Point p(extents.size());
    for (std::size_t d = extents.size(); d-- > 0;) {
      p[d] = static_cast<Coord>(k % static_cast<Key>(extents[d]));
      k /= static_cast<Key>(extents[d]);
    }
    return p;
  }
};

struct Access {
  // Per data dimension: (op-rank position, coefficient) pairs and constant.
  std::vector<std::vector<std::pair<std::size_t, Coord>>> terms;
  std::vector<Coord> constants;
  const Codec* codec = nullptr;

  Key operator()(const Point& op) const {
    Point d(terms.size());
    for (std::size_t k = 0; k < terms.size(); ++k) {
      Coord v = constants[k];
      for (const auto& [pos, c] : terms[k]) v += c * op[pos];
      d[k] = v;
    }
    return codec->encode(d);
  }
};

struct Loop {
  std::size_t pos;  // op-rank position
  Coord size;
  bool spatial;
  int level;
  Coord radix;
};

struct Layer {
  const workload::Einsum* e;
  std::vector<std::string> ranks;
  std::vector<Coord> shape;
  Codec codec;
  std::map<std::string, Access> access;
  std::vector<std::string> tensors;  // output first
  std::vector<Loop> nest;
  Coord units = 1;
};

struct Interval {
  Coord lo;
  Coord hi;
};

class Simulator {
 public:
  Simulator(const workload::FusionSet& w, const mapping::Mapping& m, const Architecture& a, Count op_limit)
      : w_(w), m_(m), a_(a), op_limit_(op_limit), K_(a.innermost()) {}

  SimResult run();

 private:
  void build();
  std::vector<std::vector<Interval>> tile_boxes(std::size_t depth) const;
  std::vector<Point> box_points(const std::vector<Interval>& box) const;
  std::vector<Point> producers(std::size_t k, const Set& needed) const;
  Set touched(std::size_t k, const std::string& t, const std::vector<Point>& ops) const;
  const Set& retained_tile(const std::string& t, int depth);
  void run_tile(std::size_t k, std::size_t iter, const std::vector<Point>& ops, const Set& history);
  Tally& tally(int level, const std::string& t) { return result_.tallies[{level, t}]; }

  const workload::FusionSet& w_;
  const mapping::Mapping& m_;
  const Architecture& a_;
  Count op_limit_;
  int K_;
  std::vector<Layer> layers_;
  std::map<std::string, Codec> tensor_codec_;
  std::map<std::string, int> level_of_;
  std::map<std::string, int> depth_of_;
  std::map<std::string, std::size_t> owner_;

  // Per-iteration state.
  std::vector<Interval> coord_intervals_;
  std::vector<std::size_t> coord_;
  std::map<int, std::vector<std::vector<Point>>> depth_ops_;
  std::map<std::pair<std::string, int>, Set> depth_tiles_;

  // [layer][iteration][level] chunk peaks, and per tensor.
  std::vector<std::vector<std::vector<Count>>> chunk_peak_;
  SimResult result_;
  Count executed_total_ = 0;
};

void Simulator::build() {
  for (std::size_t k = 0; k < w_.size(); ++k) {
    const auto& e = w_.einsum(k);
    Layer l;
    l.e = &e;
    l.ranks = e.op_ranks();
    for (const auto& r : l.ranks) l.shape.push_back(e.shape(r));
    l.codec.extents = l.shape;
    l.tensors = w_.tensors_of(k);
    layers_.push_back(std::move(l));
  }
  for (const auto& t : w_.tensors()) tensor_codec_[t.name] = Codec{t.extents};
  for (auto& l : layers_) {
    for (const auto* p : l.e->projections()) {
      Access acc;
      acc.codec = &tensor_codec_.at(p->tensor);
      for (const auto& ex : p->exprs) {
        std::vector<std::pair<std::size_t, Coord>> terms;
        for (const auto& term : ex.terms) {
          auto pos = static_cast<std::size_t>(std::find(l.ranks.begin(), l.ranks.end(), term.rank) - l.ranks.begin());
          terms.emplace_back(pos, term.coeff);
        }
        acc.terms.push_back(std::move(terms));
        acc.constants.push_back(ex.constant);
      }
      l.access.emplace(p->tensor, std::move(acc));
    }
    // Loop nest: explicit loops, then one unit loop per rank at the innermost level.
    std::map<std::size_t, Coord> last_size;
    auto it = m_.intra.find(l.e->name);
    if (it != m_.intra.end()) {
      for (const auto& il : it->second) {
        auto pos = static_cast<std::size_t>(std::find(l.ranks.begin(), l.ranks.end(), il.rank) - l.ranks.begin());
        Coord parent = last_size.count(pos) ? last_size[pos] : l.shape[pos];
        bool spatial = il.kind == mapping::LoopKind::Spatial;
        Coord radix = spatial ? (parent + il.tile_size - 1) / il.tile_size : 1;
        l.nest.push_back({pos, il.tile_size, spatial, a_.level_index(il.level), radix});
        last_size[pos] = il.tile_size;
        l.units *= radix;
      }
    }
    for (std::size_t pos = 0; pos < l.ranks.size(); ++pos) l.nest.push_back({pos, 1, false, K_, 1});
  }
  for (const auto& r : m_.retention) {
    level_of_[r.tensor] = a_.level_index(r.level);
    depth_of_[r.tensor] = r.depth;
  }
  for (const auto& t : w_.tensors()) {
    owner_[t.name] = t.consumer >= 0 ? static_cast<std::size_t>(t.consumer) : w_.size() - 1;
  }
}

// Op boxes of the last layer after applying the first `depth` partitions,
// one per coordinate, in raster order, skipping empty tiles.
std::vector<std::vector<Interval>> Simulator::tile_boxes(std::size_t depth) const {
  const auto& last = layers_.back();
  std::vector<Interval> full;
  for (Coord s : last.shape) full.push_back({0, s - 1});
  std::vector<std::vector<Interval>> out{full};
  for (std::size_t j = 0; j < depth; ++j) {
    const auto& p = m_.partitions[j];
    auto pos = static_cast<std::size_t>(std::find(last.ranks.begin(), last.ranks.end(), p.rank) - last.ranks.begin());
    // Nominal size of the enclosing tile along this rank.
    Coord parent = last.shape[pos];
    for (std::size_t q = 0; q < j; ++q) {
      if (m_.partitions[q].rank == p.rank) parent = m_.partitions[q].tile_size;
    }
    Coord trips = (parent + p.tile_size - 1) / p.tile_size;
    std::vector<std::vector<Interval>> next;
    for (const auto& box : out) {
      for (Coord c = 0; c < trips; ++c) {
        auto b = box;
        Coord lo = box[pos].lo + c * p.tile_size;
        Coord hi = std::min(box[pos].hi, lo + p.tile_size - 1);
        b[pos] = {lo, hi};
        if (lo > box[pos].hi) b[pos] = {1, 0};  // empty marker
        next.push_back(std::move(b));
      }
    }
    out = std::move(next);
  }
  return out;
}

std::vector<Point> Simulator::box_points(const std::vector<Interval>& box) const {
  std::vector<Point> pts;
  for (const auto& iv : box) {
    if (iv.lo > iv.hi) return pts;
  }
  Point p(box.size());
  for (std::size_t d = 0; d < box.size(); ++d) p[d] = box[d].lo;
  while (true) {
    pts.push_back(p);
    std::size_t d = box.size();
    while (d > 0) {
      --d;
      if (++p[d] <= box[d].hi) break;
      p[d] = box[d].lo;
      if (d == 0) return pts;
    }
    if (box.empty()) return pts;
  }
}

std::vector<Point> Simulator::producers(std::size_t k, const Set& needed) const {
  const auto& l = layers_[k];
  const auto& out = l.e->output;
  const auto& codec = tensor_codec_.at(out.tensor);
  std::vector<std::size_t> out_pos;
  for (const auto& ex : out.exprs) {
    out_pos.push_back(
        static_cast<std::size_t>(std::find(l.ranks.begin(), l.ranks.end(), ex.terms[0].rank) - l.ranks.begin()));
  }
  std::vector<std::size_t> red_pos;
  for (std::size_t p = 0; p < l.ranks.size(); ++p) {
    if (std::find(out_pos.begin(), out_pos.end(), p) == out_pos.end()) red_pos.push_back(p);
  }
  std::vector<Key> sorted(needed.begin(), needed.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<Point> ops;
  for (Key key : sorted) {
    Point y = codec.decode(key);
    Point x(l.ranks.size(), 0);
    for (std::size_t d = 0; d < out_pos.size(); ++d) x[out_pos[d]] = y[d];
    while (true) {
      ops.push_back(x);
      std::size_t r = red_pos.size();
      bool done = true;
      while (r > 0) {
        --r;
        if (++x[red_pos[r]] < l.shape[red_pos[r]]) {
          done = false;
          break;
        }
        x[red_pos[r]] = 0;
      }
      if (done) break;
    }
  }
  return ops;
}

Set Simulator::touched(std::size_t k, const std::string& t, const std::vector<Point>& ops) const {
  const auto& acc = layers_[k].access.at(t);
  Set s;
  s.reserve(ops.size());
  for (const auto& x : ops) s.insert(acc(x));
  return s;
}

const Set& Simulator::retained_tile(const std::string& t, int depth) {
  auto key = std::make_pair(t, depth);
  auto it = depth_tiles_.find(key);
  if (it != depth_tiles_.end()) return it->second;
  auto& ops = depth_ops_[depth];
  if (ops.empty()) {
    const std::size_t L = layers_.size();
    ops.resize(L);
    auto boxes = tile_boxes(static_cast<std::size_t>(depth));
    // Index of the depth-d tile containing the current iteration: the
    // coordinate prefix in mixed radix.
    std::size_t index = 0;
    {
      std::vector<Coord> trips;
      std::map<std::string, Coord> size;
      for (const auto& p : m_.partitions) {
        Coord parent = size.count(p.rank) ? size[p.rank] : layers_.back().e->shape(p.rank);
        trips.push_back((parent + p.tile_size - 1) / p.tile_size);
        size[p.rank] = p.tile_size;
      }
      for (int j = 0; j < depth; ++j) index = index * static_cast<std::size_t>(trips[static_cast<std::size_t>(j)]) + coord_[static_cast<std::size_t>(j)];
    }
    ops[L - 1] = box_points(boxes[index]);
    for (std::size_t k = L - 1; k > 0; --k) {
      const auto& inter = layers_[k - 1].e->output.tensor;
      ops[k - 1] = producers(k - 1, touched(k, inter, ops[k]));
    }
  }
  return depth_tiles_.emplace(key, touched(owner_.at(t), t, ops[owner_.at(t)])).first->second;
}

void Simulator::run_tile(std::size_t k, std::size_t iter, const std::vector<Point>& ops_in, const Set& history) {
  const auto& l = layers_[k];
  auto& peaks = chunk_peak_[k][iter];
  peaks.assign(a_.levels.size(), 0);
  if (ops_in.empty()) return;
  const Count n_ops = static_cast<Count>(ops_in.size());

  // Loop coordinates of every op, anchored at the tile's per-rank minimum.
  Point anchor = ops_in.front();
  for (const auto& x : ops_in) {
    for (std::size_t d = 0; d < x.size(); ++d) anchor[d] = std::min(anchor[d], x[d]);
  }
  std::vector<std::pair<std::vector<Coord>, std::size_t>> order;
  order.reserve(ops_in.size());
  for (std::size_t i = 0; i < ops_in.size(); ++i) {
    Point start = anchor;
    std::vector<Coord> coords;
    coords.reserve(l.nest.size());
    for (const auto& lp : l.nest) {
      Coord c = (ops_in[i][lp.pos] - start[lp.pos]) / lp.size;
      start[lp.pos] += c * lp.size;
      coords.push_back(c);
    }
    order.emplace_back(std::move(coords), i);
  }
  std::sort(order.begin(), order.end());

  const std::string& out = l.e->output.tensor;
  for (int lev = 1; lev <= K_; ++lev) {
    std::size_t prefix = 0;
    while (prefix < l.nest.size() && l.nest[prefix].level < lev) ++prefix;
    // Group ops into chunks sharing the first `prefix` loop coordinates.
    std::vector<std::vector<std::size_t>> chunks;
    for (std::size_t i = 0; i < order.size(); ++i) {
      bool fresh = i == 0 || !std::equal(order[i].first.begin(), order[i].first.begin() + static_cast<long>(prefix),
                                         order[i - 1].first.begin());
      if (fresh) chunks.emplace_back();
      chunks.back().push_back(order[i].second);
    }
    std::vector<Count> footprint(chunks.size(), 0);
    for (const auto& t : l.tensors) {
      if (level_of_.at(t) >= lev) continue;
      const auto& acc = l.access.at(t);
      Set prev;
      Set written = (t == out) ? history : Set{};
      Count peak = 0;
      for (std::size_t j = 0; j < chunks.size(); ++j) {
        Set cur;
        for (std::size_t i : chunks[j]) cur.insert(acc(ops_in[i]));
        footprint[j] += static_cast<Count>(cur.size());
        peak = std::max(peak, static_cast<Count>(cur.size()));
        if (t == out) {
          for (Key v : cur) {
            if (!prev.count(v) && written.count(v)) {
              ++tally(lev, t).fills;
              ++tally(lev - 1, t).reads;
            }
          }
          for (Key v : prev) {
            if (!cur.count(v)) ++tally(lev - 1, t).updates;
          }
          written.insert(cur.begin(), cur.end());
        } else {
          for (Key v : cur) {
            if (!prev.count(v)) {
              ++tally(lev, t).fills;
              ++tally(lev - 1, t).reads;
            }
          }
        }
        prev = std::move(cur);
      }
      if (t == out) tally(lev - 1, t).updates += static_cast<Count>(prev.size());
      auto& pt = result_.peak_per_tensor[static_cast<std::size_t>(lev)][t];
      pt = std::max(pt, peak);
    }
    for (Count f : footprint) peaks[static_cast<std::size_t>(lev)] = std::max(peaks[static_cast<std::size_t>(lev)], f);
  }

  // Deliveries: one read per distinct word per temporal step; the word
  // travels to the farthest unit that needs it.
  for (const auto& t : l.tensors) {
    if (t == out) continue;
    const auto& acc = l.access.at(t);
    std::map<std::vector<Coord>, std::unordered_map<Key, Coord>> steps;
    for (const auto& [coords, i] : order) {
      std::vector<Coord> temporal;
      Coord unit = 0;
      for (std::size_t j = 0; j < l.nest.size(); ++j) {
        if (l.nest[j].spatial) unit = unit * l.nest[j].radix + coords[j];
        else temporal.push_back(coords[j]);
      }
      auto& far = steps[temporal][acc(ops_in[i])];
      far = std::max(far, unit + 1);
    }
    for (const auto& [key, words] : steps) {
      tally(K_, t).reads += static_cast<Count>(words.size());
      for (const auto& [v, h] : words) result_.hops[static_cast<std::size_t>(K_)] += h;
    }
  }
  tally(K_, out).updates += n_ops;
  result_.compute_ops += n_ops;
  Count rate = l.units * a_.compute.ops_per_cycle_per_unit;
  result_.tile_cycles[k][iter] = (n_ops + rate - 1) / rate;
}

SimResult Simulator::run() {
  mapping::require_valid(m_, w_, a_);
  build();
  const std::size_t L = layers_.size();
  const std::size_t nlev = a_.levels.size();
  const std::string& out_name = layers_.back().e->output.tensor;
  const bool pipeline = m_.parallelism == mapping::Parallelism::Pipeline;

  // Enumerate iterations: every full-depth coordinate whose tile is nonempty.
  auto boxes = tile_boxes(m_.partitions.size());
  std::vector<Coord> trips;
  {
    std::map<std::string, Coord> size;
    for (const auto& p : m_.partitions) {
      Coord parent = size.count(p.rank) ? size[p.rank] : layers_.back().e->shape(p.rank);
      trips.push_back((parent + p.tile_size - 1) / p.tile_size);
      size[p.rank] = p.tile_size;
    }
  }
  std::vector<std::pair<std::vector<std::size_t>, std::size_t>> iterations;
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    bool empty = std::any_of(boxes[b].begin(), boxes[b].end(), [](const Interval& iv) { return iv.lo > iv.hi; });
    if (empty) continue;
    std::vector<std::size_t> c(trips.size());
    std::size_t rest = b;
    for (std::size_t j = trips.size(); j-- > 0;) {
      c[j] = rest % static_cast<std::size_t>(trips[j]);
      rest /= static_cast<std::size_t>(trips[j]);
    }
    iterations.emplace_back(std::move(c), b);
  }
  const std::size_t n = iterations.size();

  result_.hops.assign(nlev, 0);
  result_.executed_ops.assign(L, 0);
  result_.recompute_ops.assign(L, 0);
  result_.peak_per_tensor.assign(nlev, {});
  result_.tile_cycles.assign(L, std::vector<Count>(n, 0));
  chunk_peak_.assign(L, std::vector<std::vector<Count>>(n));

  std::map<std::string, Set> buffer;
  std::vector<Set> distinct(L);
  Set history;
  // Sizes of each tensor's buffer after each iteration; full sets only for
  // intermediates under pipelining.
  std::map<std::string, std::vector<Count>> after_size;
  std::map<std::string, std::vector<Set>> after_set;
  std::map<std::string, std::vector<Set>> fresh_set;

  for (std::size_t it = 0; it < n; ++it) {
    coord_ = iterations[it].first;
    depth_ops_.clear();
    depth_tiles_.clear();
    std::vector<Point> ops = box_points(boxes[iterations[it].second]);
    for (std::size_t k = L; k-- > 0;) {
      const auto& l = layers_[k];
      executed_total_ += static_cast<Count>(ops.size());
      if (executed_total_ > op_limit_) {
        throw LimitExceededError("simulation exceeds the operation limit of " + std::to_string(op_limit_));
      }
      result_.executed_ops[k] += static_cast<Count>(ops.size());
      for (const auto& x : ops) distinct[k].insert(l.codec.encode(x));

      std::vector<Point> next_ops;
      Set out_history;
      for (const auto& t : l.tensors) {
        const auto& info = w_.tensor(t);
        bool buffered = owner_.at(t) == k;  // consumer side, or the external output
        if (!buffered) continue;            // intermediates are tracked where they are read
        Set data = touched(k, t, ops);
        int d = depth_of_.at(t);
        Set kept;
        auto& buf = buffer[t];
        if (d == 0) {
          kept = buf;
        } else {
          const Set& tile = retained_tile(t, d);
          for (Key v : buf) {
            if (tile.count(v)) kept.insert(v);
          }
        }
        Set fresh;
        for (Key v : data) {
          if (!kept.count(v)) fresh.insert(v);
        }
        const int lt = level_of_.at(t);
        if (info.is_backed() && lt >= 1) {
          if (t != out_name) {
            tally(lt, t).fills += static_cast<Count>(fresh.size());
            tally(0, t).reads += static_cast<Count>(fresh.size());
          } else {
            Count refetch = 0;
            for (Key v : fresh) refetch += history.count(v) ? 1 : 0;
            tally(lt, t).fills += refetch;
            tally(0, t).reads += refetch;
            tally(0, t).updates += static_cast<Count>(buf.size() - kept.size());
          }
        }
        Set next = kept;
        next.insert(data.begin(), data.end());
        buf = std::move(next);
        after_size[t].push_back(static_cast<Count>(buf.size()));
        if (pipeline && info.role == TensorRole::Intermediate) {
          after_set[t].push_back(buf);
          fresh_set[t].push_back(fresh);
        }
        if (info.role == TensorRole::Intermediate) next_ops = producers(k - 1, fresh);
      }
      if (k == L - 1) out_history = history;
      run_tile(k, it, ops, out_history);
      ops = std::move(next_ops);
    }
    for (const auto& x : box_points(boxes[iterations[it].second])) {
      history.insert(layers_.back().access.at(out_name)(x));
    }
  }
  if (level_of_.at(out_name) >= 1 && n > 0) tally(0, out_name).updates += static_cast<Count>(buffer[out_name].size());

  for (std::size_t k = 0; k < L; ++k) {
    result_.recompute_ops[k] = result_.executed_ops[k] - static_cast<Count>(distinct[k].size());
  }

  // Occupancy per schedule step.
  result_.peak_occupancy.assign(nlev, 0);
  const std::size_t steps = pipeline ? n + L - 1 : n;
  for (std::size_t s = 0; s < steps; ++s) {
    auto iter_of = [&](std::size_t k) -> long {
      if (!pipeline) return static_cast<long>(s);
      long i = static_cast<long>(s) - static_cast<long>(k);
      return (i >= 0 && i < static_cast<long>(n)) ? i : -1;
    };
    std::vector<Count> level_total(nlev, 0);
    for (const auto& t : w_.tensors()) {
      const int lt = level_of_.at(t.name);
      if (lt == 0) continue;
      Count live = 0;
      if (t.role == TensorRole::Intermediate && pipeline) {
        long r = iter_of(static_cast<std::size_t>(t.consumer));
        long p = iter_of(static_cast<std::size_t>(t.producer));
        Set u;
        if (r >= 0) u = after_set[t.name][static_cast<std::size_t>(r)];
        if (p >= 0) {
          const auto& f = fresh_set[t.name][static_cast<std::size_t>(p)];
          u.insert(f.begin(), f.end());
        }
        live = static_cast<Count>(u.size());
      } else {
        long i = iter_of(owner_.at(t.name));
        if (i >= 0) live = after_size[t.name][static_cast<std::size_t>(i)];
      }
      level_total[static_cast<std::size_t>(lt)] += live;
      auto& pt = result_.peak_per_tensor[static_cast<std::size_t>(lt)][t.name];
      pt = std::max(pt, live);
      result_.trace.push_back({s, a_.levels[static_cast<std::size_t>(lt)].name, t.name, live});
    }
    for (std::size_t lev = 1; lev < nlev; ++lev) {
      Count chunks = 0;
      for (std::size_t k = 0; k < L; ++k) {
        long i = iter_of(k);
        if (i < 0) continue;
        Count c = chunk_peak_[k][static_cast<std::size_t>(i)][lev];
        chunks = pipeline ? chunks + c : std::max(chunks, c);
      }
      Count total = level_total[lev] + chunks;
      result_.peak_occupancy[lev] = std::max(result_.peak_occupancy[lev], total);
      result_.trace.push_back({s, a_.levels[lev].name, "", total});
    }
  }

  for (auto it = result_.tallies.begin(); it != result_.tallies.end();) {
    const auto& v = it->second;
    if (v.fills == 0 && v.reads == 0 && v.updates == 0) it = result_.tallies.erase(it);
    else ++it;
  }
  for (const auto& [key, v] : result_.tallies) {
    if (key.first == 0) result_.offchip_words += v.fills + v.reads + v.updates;
  }
  return std::move(result_);
}

}  // namespace

SimResult simulate(const workload::FusionSet& w, const mapping::Mapping& m, const Architecture& a, Count op_limit) {
  Simulator sim(w, m, a, op_limit);
  return sim.run();
}

std::string trace_csv(const SimResult& r) {
  std::ostringstream os;
  os << "step,level,tensor,occupancy\n";
  for (const auto& s : r.trace) os << s.step << ',' << s.level << ',' << (s.tensor.empty() ? "*" : s.tensor) << ',' << s.words << '\n';
  return os.str();
}

}  // namespace fusedflow::oracle
