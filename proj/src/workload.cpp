// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusedflow/workload.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "json.hpp"

namespace fusedflow::workload {

using json = nlohmann::json;
using geometry::AffineTerm;

const char* to_string(TensorRole role) {
  switch (role) {
    case TensorRole::ExternalInput: return "external_input";
    case TensorRole::Filter: return "filter";
    case TensorRole::Intermediate: return "intermediate";
    case TensorRole::ExternalOutput: return "external_output";
  }
  return "?";
}

const char* to_string(ReuseClass reuse) {
  switch (reuse) {
    case ReuseClass::Full: return "full";
    case ReuseClass::Conv: return "conv";
    case ReuseClass::None: return "none";
  }
  return "?";
}

RankTuple Einsum::op_ranks() const {
  RankTuple out;
  auto add = [&](const TensorProjection& p) {
    for (const auto& e : p.exprs) {
      for (const auto& t : e.terms) {
        if (std::find(out.begin(), out.end(), t.rank) == out.end()) out.push_back(t.rank);
      }
    }
  };
  add(output);
  for (const auto& in : inputs) add(in);
  return out;
}

Coord Einsum::shape(const RankId& rank) const {
  auto it = rank_shapes.find(rank);
  if (it == rank_shapes.end()) throw UnknownNameError("einsum " + name + " has no rank " + rank);
  return it->second;
}

bool Einsum::has_op_rank(const RankId& rank) const {
  auto uses = [&](const TensorProjection& p) {
    for (const auto& e : p.exprs) {
      for (const auto& t : e.terms) {
        if (t.rank == rank) return true;
      }
    }
    return false;
  };
  return uses(output) || std::any_of(inputs.begin(), inputs.end(), uses);
}

std::vector<const TensorProjection*> Einsum::projections() const {
  std::vector<const TensorProjection*> out{&output};
  for (const auto& in : inputs) out.push_back(&in);
  return out;
}

const TensorProjection& Einsum::projection(const std::string& tensor) const {
  for (const auto* p : projections()) {
    if (p->tensor == tensor) return *p;
  }
  throw UnknownNameError("einsum " + name + " does not use tensor " + tensor);
}

bool Einsum::uses(const std::string& tensor) const {
  for (const auto* p : projections()) {
    if (p->tensor == tensor) return true;
  }
  return false;
}

RankTuple Einsum::reduction_ranks() const {
  RankTuple out;
  for (const auto& r : op_ranks()) {
    bool in_output = std::any_of(output.exprs.begin(), output.exprs.end(),
                                 [&](const AffineExpr& e) { return e.mentions(r); });
    if (!in_output) out.push_back(r);
  }
  return out;
}

namespace {

// [min, max] of an expression over the einsum's rank ranges.
std::pair<Coord, Coord> expr_range(const Einsum& e, const AffineExpr& expr) {
  Coord lo = expr.constant;
  Coord hi = expr.constant;
  for (const auto& t : expr.terms) {
    Coord top = t.coeff * (e.shape(t.rank) - 1);
    lo += std::min<Coord>(0, top);
    hi += std::max<Coord>(0, top);
  }
  return {lo, hi};
}

void check_projection(const Einsum& e, const TensorProjection& p) {
  std::set<RankId> seen;
  for (const auto& expr : p.exprs) {
    if (expr.terms.empty()) throw ShapeError("tensor " + p.tensor + " in " + e.name + " has a constant index");
    if (expr.terms.size() > 2) {
      throw ShapeError("tensor " + p.tensor + " in " + e.name + ": index expressions allow at most two terms");
    }
    for (const auto& t : expr.terms) {
      if (t.coeff == 0) throw ShapeError("tensor " + p.tensor + ": zero coefficient on " + t.rank);
      if (!e.rank_shapes.count(t.rank)) {
        throw ShapeError("rank " + t.rank + " used by tensor " + p.tensor + " has no shape in " + e.name);
      }
      if (e.rank_shapes.at(t.rank) <= 0) throw ShapeError("rank " + t.rank + " must have a positive shape");
      if (!seen.insert(t.rank).second) {
        throw ShapeError("rank " + t.rank + " appears in more than one index of tensor " + p.tensor);
      }
    }
  }
}

}  // namespace

FusionSet::FusionSet(std::vector<Einsum> einsums) : einsums_(std::move(einsums)) {
  if (einsums_.empty()) throw ChainError("fusion set has no einsums");
  std::set<std::string> names;
  for (const auto& e : einsums_) {
    if (!names.insert(e.name).second) throw ChainError("duplicate einsum name " + e.name);
    for (const auto& expr : e.output.exprs) {
      if (!expr.is_single_index()) {
        throw ShapeError("output " + e.output.tensor + " of " + e.name + " must use plain single-index terms");
      }
    }
    check_projection(e, e.output);
    for (const auto& in : e.inputs) check_projection(e, in);
  }

  // Producer / consumer structure.
  std::map<std::string, int> producer;
  std::map<std::string, std::vector<int>> users;
  for (std::size_t i = 0; i < einsums_.size(); ++i) {
    const auto& e = einsums_[i];
    if (producer.count(e.output.tensor)) throw ChainError("tensor " + e.output.tensor + " is produced twice");
    producer[e.output.tensor] = static_cast<int>(i);
    std::set<std::string> local;
    for (const auto* p : e.projections()) {
      if (!local.insert(p->tensor).second) {
        throw ChainError("tensor " + p->tensor + " appears twice in " + e.name);
      }
    }
    for (const auto& in : e.inputs) users[in.tensor].push_back(static_cast<int>(i));
  }
  for (const auto& [t, u] : users) {
    if (u.size() > 1) throw ChainError("tensor " + t + " is read by more than one einsum");
    auto p = producer.find(t);
    if (p != producer.end()) {
      if (u[0] != p->second + 1) {
        throw ChainError("intermediate " + t + " must be consumed by the einsum right after its producer");
      }
    }
  }
  for (std::size_t i = 0; i + 1 < einsums_.size(); ++i) {
    const auto& out = einsums_[i].output.tensor;
    if (!users.count(out)) throw ChainError("tensor " + out + " produced by " + einsums_[i].name + " is never consumed");
  }
  if (users.count(einsums_.back().output.tensor)) {
    throw ChainError("output of the last einsum cannot be consumed inside the fusion set");
  }

  // Resolve data ranks and extents.
  std::map<std::string, std::size_t> index;
  auto add_tensor = [&](TensorInfo info) {
    index[info.name] = tensors_.size();
    tensors_.push_back(std::move(info));
  };
  for (std::size_t i = 0; i < einsums_.size(); ++i) {
    auto& e = einsums_[i];
    // Output.
    {
      auto& p = e.output;
      p.data_ranks.clear();
      TensorInfo info;
      info.name = p.tensor;
      info.producer = static_cast<int>(i);
      info.role = (i + 1 == einsums_.size()) ? TensorRole::ExternalOutput : TensorRole::Intermediate;
      for (const auto& expr : p.exprs) {
        p.data_ranks.push_back(expr.terms[0].rank);
        info.dims.push_back(expr.terms[0].rank);
        info.extents.push_back(e.shape(expr.terms[0].rank));
      }
      if (info.role == TensorRole::Intermediate) info.consumer = static_cast<int>(i + 1);
      add_tensor(std::move(info));
    }
    bool first_external = (i == 0);
    for (auto& p : e.inputs) {
      RankTuple declared = p.data_ranks;
      if (!declared.empty() && declared.size() != p.exprs.size()) {
        throw ShapeError("tensor " + p.tensor + " declares " + std::to_string(declared.size()) +
                         " data ranks but has " + std::to_string(p.exprs.size()) + " indices");
      }
      auto it = index.find(p.tensor);
      if (it != index.end()) {
        // Intermediate produced by the previous einsum.
        const auto& info = tensors_[it->second];
        if (info.dims.size() != p.exprs.size()) {
          throw ShapeError("tensor " + p.tensor + " has " + std::to_string(info.dims.size()) + " ranks in " +
                           einsums_[info.producer].name + " but " + std::to_string(p.exprs.size()) + " in " + e.name);
        }
        for (std::size_t k = 0; k < p.exprs.size(); ++k) {
          auto [lo, hi] = expr_range(e, p.exprs[k]);
          if (lo < 0 || hi >= info.extents[k]) {
            throw ShapeError("index " + std::to_string(k) + " of tensor " + p.tensor + " in " + e.name +
                             " reaches " + std::to_string(hi) + " but " + einsums_[info.producer].name +
                             " produces rank " + info.dims[k] + " with shape " + std::to_string(info.extents[k]));
          }
          if (!declared.empty() && e.rank_shapes.count(declared[k]) &&
              e.rank_shapes.at(declared[k]) != info.extents[k]) {
            throw ShapeError("rank " + declared[k] + " of tensor " + p.tensor + " has shape " +
                             std::to_string(e.rank_shapes.at(declared[k])) + " in " + e.name + " but " +
                             std::to_string(info.extents[k]) + " in " + einsums_[info.producer].name);
          }
        }
        p.data_ranks = info.dims;
        continue;
      }
      TensorInfo info;
      info.name = p.tensor;
      info.consumer = static_cast<int>(i);
      if (p.declared_role) {
        if (*p.declared_role != TensorRole::ExternalInput && *p.declared_role != TensorRole::Filter) {
          throw ChainError("tensor " + p.tensor + " declares role " + to_string(*p.declared_role) +
                           " but is not produced inside the fusion set");
        }
        info.role = *p.declared_role;
      } else {
        info.role = first_external ? TensorRole::ExternalInput : TensorRole::Filter;
      }
      first_external = false;
      p.data_ranks.clear();
      for (std::size_t k = 0; k < p.exprs.size(); ++k) {
        const auto& expr = p.exprs[k];
        auto [lo, hi] = expr_range(e, expr);
        if (lo < 0) throw ShapeError("index " + std::to_string(k) + " of tensor " + p.tensor + " can be negative");
        RankId name;
        Coord extent = hi + 1;
        if (!declared.empty()) {
          name = declared[k];
        } else if (expr.terms.size() == 1 && expr.terms[0].coeff == 1 && expr.constant == 0) {
          name = expr.terms[0].rank;
        } else {
          name = p.tensor + "_" + std::to_string(k);
        }
        if (expr.is_single_index() && name == expr.terms[0].rank) {
          extent = e.shape(name);
        } else if (e.rank_shapes.count(name)) {
          extent = e.rank_shapes.at(name);
          if (extent < hi + 1) {
            throw ShapeError("rank " + name + " of tensor " + p.tensor + " has shape " + std::to_string(extent) +
                             " but the index reaches " + std::to_string(hi) + " (needs >= " +
                             std::to_string(hi + 1) + ")");
          }
        }
        p.data_ranks.push_back(name);
        info.dims.push_back(name);
        info.extents.push_back(extent);
      }
      std::set<RankId> uniq(info.dims.begin(), info.dims.end());
      if (uniq.size() != info.dims.size()) throw ShapeError("tensor " + p.tensor + " repeats a data rank name");
      add_tensor(std::move(info));
    }
  }

  for (const auto& e : einsums_) {
    for (const auto& in : e.inputs) {
      try {
        data_relation(e, in.tensor);
      } catch (const ShapeError&) {
        throw;
      } catch (const Error& err) {
        throw ShapeError("tensor " + in.tensor + " in " + e.name + ": " + err.what());
      }
    }
  }
}

int FusionSet::einsum_index(const std::string& name) const {
  for (std::size_t i = 0; i < einsums_.size(); ++i) {
    if (einsums_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

const TensorInfo& FusionSet::tensor(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw UnknownNameError("unknown tensor " + name);
}

bool FusionSet::has_tensor(const std::string& name) const {
  return std::any_of(tensors_.begin(), tensors_.end(), [&](const TensorInfo& t) { return t.name == name; });
}

std::vector<std::string> FusionSet::tensors_of(std::size_t i) const {
  std::vector<std::string> out;
  for (const auto* p : einsums_.at(i).projections()) out.push_back(p->tensor);
  return out;
}

geometry::Region FusionSet::tensor_extent(const std::string& name) const {
  const auto& t = tensor(name);
  geometry::Box b;
  for (Coord e : t.extents) b.dims.push_back(geometry::StridedInterval::make(0, e - 1));
  return geometry::Region::of_box(t.dims, b);
}

namespace {

RankId rank_of_index(const std::string& idx) {
  RankId r = idx;
  for (auto& c : r) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return r;
}

AffineExpr parse_expr(const json& j, const std::string& where) {
  if (j.is_string()) return AffineExpr::index(rank_of_index(j.get<std::string>()));
  if (!j.is_array()) throw ParseError(where + ": index must be a string or [[coeff, rank]..., constant]");
  AffineExpr e;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto& item = j[k];
    if (item.is_number_integer()) {
      if (k + 1 != j.size()) throw ParseError(where + ": constant must come last");
      e.constant = item.get<Coord>();
    } else if (item.is_array() && item.size() == 2 && item[0].is_number_integer() && item[1].is_string()) {
      e.terms.push_back(AffineTerm{item[0].get<Coord>(), rank_of_index(item[1].get<std::string>())});
    } else {
      throw ParseError(where + ": term must be [coeff, rank]");
    }
  }
  return e;
}

json dump_expr(const AffineExpr& e) {
  auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  if (e.is_single_index()) return lower(e.terms[0].rank);
  json arr = json::array();
  for (const auto& t : e.terms) arr.push_back(json::array({t.coeff, lower(t.rank)}));
  arr.push_back(e.constant);
  return arr;
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(where + ": missing field \"" + key + "\"");
  return j.at(key);
}

TensorProjection parse_projection(const json& j, const std::string& where) {
  TensorProjection p;
  const auto& t = require(j, "tensor", where);
  if (!t.is_string()) throw ParseError(where + ": \"tensor\" must be a string");
  p.tensor = t.get<std::string>();
  const auto& idx = require(j, "indices", where);
  if (!idx.is_array()) throw ParseError(where + ": \"indices\" must be an array");
  for (std::size_t k = 0; k < idx.size(); ++k) {
    p.exprs.push_back(parse_expr(idx[k], where + ".indices[" + std::to_string(k) + "]"));
  }
  if (j.contains("ranks")) {
    for (const auto& r : j.at("ranks")) p.data_ranks.push_back(rank_of_index(r.get<std::string>()));
  }
  if (j.contains("role")) {
    auto role = j.at("role").get<std::string>();
    if (role == "filter") p.declared_role = TensorRole::Filter;
    else if (role == "input" || role == "external_input") p.declared_role = TensorRole::ExternalInput;
    else throw ParseError(where + ": unknown role \"" + role + "\"");
  }
  return p;
}

}  // namespace

FusionSet parse_workload(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("workload syntax error: ") + e.what(), static_cast<long>(e.byte));
  }
  try {
    const auto& arr = require(doc, "einsums", "workload");
    if (!arr.is_array()) throw ParseError("workload: \"einsums\" must be an array");
    std::vector<Einsum> einsums;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto& j = arr[i];
      std::string where = "einsums[" + std::to_string(i) + "]";
      Einsum e;
      e.name = require(j, "name", where).get<std::string>();
      where = "einsum " + e.name;
      e.output = parse_projection(require(j, "output", where), where + ".output");
      const auto& ins = require(j, "inputs", where);
      for (std::size_t k = 0; k < ins.size(); ++k) {
        e.inputs.push_back(parse_projection(ins[k], where + ".inputs[" + std::to_string(k) + "]"));
      }
      for (const auto& [rank, shape] : require(j, "rank_shapes", where).items()) {
        if (!shape.is_number_integer() || shape.get<Coord>() <= 0) {
          throw ParseError(where + ": shape of rank " + rank + " must be a positive integer");
        }
        e.rank_shapes[rank_of_index(rank)] = shape.get<Coord>();
      }
      einsums.push_back(std::move(e));
    }
    return FusionSet(std::move(einsums));
  } catch (const json::exception& e) {
    throw ParseError(std::string("workload schema error: ") + e.what());
  }
}

std::string serialize_workload(const FusionSet& fs) {
  json arr = json::array();
  for (const auto& e : fs.einsums()) {
    auto proj = [&](const TensorProjection& p, bool with_ranks) {
      json j;
      j["tensor"] = p.tensor;
      json idx = json::array();
      for (const auto& x : p.exprs) idx.push_back(dump_expr(x));
      j["indices"] = idx;
      if (with_ranks) j["ranks"] = p.data_ranks;
      if (p.declared_role) j["role"] = *p.declared_role == TensorRole::Filter ? "filter" : "input";
      return j;
    };
    json je;
    je["name"] = e.name;
    je["output"] = proj(e.output, false);
    json ins = json::array();
    for (const auto& in : e.inputs) {
      bool intermediate = fs.tensor(in.tensor).role == TensorRole::Intermediate;
      ins.push_back(proj(in, !intermediate));
    }
    je["inputs"] = ins;
    je["rank_shapes"] = e.rank_shapes;
    arr.push_back(je);
  }
  return json{{"einsums", arr}}.dump(2);
}

std::map<std::string, ReuseClass> classify_reuse(const Einsum& einsum, const RankId& rank) {
  if (!einsum.has_op_rank(rank)) throw UnknownNameError("einsum " + einsum.name + " has no rank " + rank);
  std::map<std::string, ReuseClass> out;
  for (const auto* p : einsum.projections()) {
    ReuseClass c = ReuseClass::Full;
    for (const auto& e : p->exprs) {
      if (!e.mentions(rank)) continue;
      c = e.terms.size() > 1 ? ReuseClass::Conv : ReuseClass::None;
      break;
    }
    out[p->tensor] = c;
  }
  return out;
}

geometry::AffineRelation data_relation(const Einsum& einsum, const std::string& tensor) {
  const auto& p = einsum.projection(tensor);
  RankTuple codomain = p.data_ranks;
  if (codomain.size() != p.exprs.size()) {
    codomain.clear();
    for (std::size_t k = 0; k < p.exprs.size(); ++k) codomain.push_back(tensor + "_" + std::to_string(k));
  }
  return geometry::AffineRelation(einsum.op_ranks(), codomain, p.exprs);
}

geometry::Region operation_space(const Einsum& einsum) {
  geometry::Box b;
  auto ranks = einsum.op_ranks();
  for (const auto& r : ranks) b.dims.push_back(geometry::StridedInterval::make(0, einsum.shape(r) - 1));
  return geometry::Region::of_box(ranks, b);
}

geometry::Region producer_ops(const geometry::Region& needed, const Einsum& producer) {
  auto ranks = producer.op_ranks();
  geometry::Region out(ranks);
  if (needed.empty()) return out;
  const auto& proj = producer.output;
  if (needed.ranks() != proj.data_ranks) {
    throw RankMismatchError("needed region is not over the output ranks of " + producer.name);
  }
  auto bb = needed.bounding_box();
  for (std::size_t k = 0; k < bb.dims.size(); ++k) {
    if (bb.dims[k].lo < 0 || bb.dims[k].hi >= producer.shape(proj.data_ranks[k])) {
      throw ShapeError("needed region exceeds the extent of " + proj.tensor + " along " + proj.data_ranks[k]);
    }
  }
  std::vector<geometry::Box> boxes;
  for (const auto& b : needed.boxes()) {
    geometry::Box ob;
    for (const auto& r : ranks) {
      auto it = std::find(proj.data_ranks.begin(), proj.data_ranks.end(), r);
      if (it != proj.data_ranks.end()) {
        ob.dims.push_back(b.dims[static_cast<std::size_t>(it - proj.data_ranks.begin())]);
      } else {
        ob.dims.push_back(geometry::StridedInterval::make(0, producer.shape(r) - 1));
      }
    }
    boxes.push_back(std::move(ob));
  }
  return geometry::Region::from_disjoint(ranks, std::move(boxes));
}

Count access_multiplicity(const Einsum& einsum, const std::string& tensor, std::span<const Coord> point) {
  const auto& p = einsum.projection(tensor);
  if (point.size() != p.exprs.size()) throw RankMismatchError("point arity differs from tensor rank count");
  Count total = 1;
  std::set<RankId> used;
  for (std::size_t k = 0; k < p.exprs.size(); ++k) {
    const auto& e = p.exprs[k];
    Coord target = point[k] - e.constant;
    Count n = 0;
    if (e.terms.size() == 1) {
      const auto& t = e.terms[0];
      n = (target % t.coeff == 0 && target / t.coeff >= 0 && target / t.coeff < einsum.shape(t.rank)) ? 1 : 0;
    } else {
      const auto& a = e.terms[0];
      const auto& b = e.terms[1];
      for (Coord i = 0; i < einsum.shape(a.rank); ++i) {
        Coord rest = target - a.coeff * i;
        if (rest % b.coeff == 0 && rest / b.coeff >= 0 && rest / b.coeff < einsum.shape(b.rank)) ++n;
      }
    }
    for (const auto& t : e.terms) used.insert(t.rank);
    total *= n;
  }
  for (const auto& r : einsum.op_ranks()) {
    if (!used.count(r)) total *= einsum.shape(r);
  }
  return total;
}

}  // namespace fusedflow::workload
