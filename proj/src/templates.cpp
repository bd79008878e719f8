// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusedflow/templates.hpp"

namespace fusedflow::templates {

using geometry::AffineExpr;
using workload::Einsum;
using workload::TensorProjection;

namespace {

std::string suffix(const std::string& rank, std::size_t k) { return rank + std::to_string(k); }

AffineExpr window(Coord stride, const std::string& out, const std::string& kernel, bool has_kernel) {
  AffineExpr e;
  e.terms.push_back({stride, out});
  if (has_kernel) e.terms.push_back({1, kernel});
  return e;
}

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "Conv";
    case LayerKind::Pwise: return "Pwise";
    case LayerKind::Dwise: return "Dwise";
    case LayerKind::Fc: return "Fc";
  }
  return "Layer";
}

}  // namespace

workload::FusionSet build_chain(const InputSpec& in, const std::vector<LayerSpec>& layers) {
  std::vector<Einsum> einsums;
  Coord channels = in.channels;
  Coord h = in.height;
  Coord wd = in.width;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::size_t k = i + 1;
    const auto& spec = layers[i];
    Einsum e;
    e.name = std::string(kind_name(spec.kind)) + std::to_string(k);
    const std::string fin = "Fmap" + std::to_string(k);
    const std::string fout = "Fmap" + std::to_string(k + 1);
    const std::string filt = "Filter" + std::to_string(k);
    const auto M = suffix("M", k), C = suffix("C", k), P = suffix("P", k), Q = suffix("Q", k), R = suffix("R", k),
               S = suffix("S", k), B = suffix("B", k);
    TensorProjection input{fin, {}, {}, {}};
    if (spec.kind == LayerKind::Fc) {
      e.rank_shapes = {{M, spec.out_channels}, {C, channels}, {B, h}};
      e.output = {fout, {AffineExpr::index(M), AffineExpr::index(B)}, {}, {}};
      input.exprs = {AffineExpr::index(C), AffineExpr::index(B)};
      e.inputs = {input, {filt, {AffineExpr::index(M), AffineExpr::index(C)}, {}, {}}};
      channels = spec.out_channels;
      einsums.push_back(std::move(e));
      continue;
    }
    const bool has_kernel = spec.kind != LayerKind::Pwise;
    const Coord r = has_kernel ? spec.kernel : 1;
    if (h < r || (in.two_d && wd < r)) throw ShapeError("layer " + e.name + ": kernel larger than its input");
    const Coord p = (h - r) / spec.stride + 1;
    const Coord q = in.two_d ? (wd - r) / spec.stride + 1 : 1;
    const bool dwise = spec.kind == LayerKind::Dwise;
    const std::string out_ch = dwise ? C : M;
    e.rank_shapes[C] = channels;
    if (!dwise) e.rank_shapes[M] = spec.out_channels;
    e.rank_shapes[P] = p;
    if (has_kernel) e.rank_shapes[R] = r;
    if (in.two_d) {
      e.rank_shapes[Q] = q;
      if (has_kernel) e.rank_shapes[S] = r;
    }
    e.output = {fout, {AffineExpr::index(out_ch), AffineExpr::index(P)}, {}, {}};
    if (in.two_d) e.output.exprs.push_back(AffineExpr::index(Q));
    input.exprs = {AffineExpr::index(C), window(spec.stride, P, R, has_kernel)};
    if (in.two_d) input.exprs.push_back(window(spec.stride, Q, S, has_kernel));
    if (k == 1) {
      input.data_ranks = {C, suffix("H", k)};
      e.rank_shapes[suffix("H", k)] = h;
      if (in.two_d) {
        input.data_ranks.push_back(suffix("W", k));
        e.rank_shapes[suffix("W", k)] = wd;
      }
    }
    TensorProjection filter{filt, {}, {}, {}};
    if (!dwise) filter.exprs.push_back(AffineExpr::index(M));
    filter.exprs.push_back(AffineExpr::index(C));
    if (has_kernel) {
      filter.exprs.push_back(AffineExpr::index(R));
      if (in.two_d) filter.exprs.push_back(AffineExpr::index(S));
    }
    e.inputs = {input, filter};
    einsums.push_back(std::move(e));
    channels = dwise ? channels : spec.out_channels;
    h = p;
    wd = q;
  }
  return workload::FusionSet(std::move(einsums));
}

namespace {

Coord get(const std::map<std::string, Coord>& m, const std::string& key, Coord fallback) {
  auto it = m.find(key);
  return it == m.end() ? fallback : it->second;
}

Coord channels_of(const std::map<std::string, Coord>& m, std::size_t k, Coord fallback) {
  return get(m, "M" + std::to_string(k), get(m, "M", fallback));
}

}  // namespace

workload::FusionSet named_template(const std::string& name, const std::map<std::string, Coord>& shapes) {
  InputSpec in;
  in.channels = get(shapes, "C", 8);
  in.height = get(shapes, "H", 16);
  in.width = get(shapes, "W", in.height);
  in.two_d = get(shapes, "2D", 1) != 0;
  const Coord r = get(shapes, "R", 3);
  if (name == "conv_conv") {
    return build_chain(in, {{LayerKind::Conv, channels_of(shapes, 1, 8), r, 1},
                            {LayerKind::Conv, channels_of(shapes, 2, 8), r, 1}});
  }
  if (name == "conv_conv_conv") {
    return build_chain(in, {{LayerKind::Conv, channels_of(shapes, 1, 8), r, 1},
                            {LayerKind::Conv, channels_of(shapes, 2, 8), r, 1},
                            {LayerKind::Conv, channels_of(shapes, 3, 8), r, 1}});
  }
  if (name == "pwise_dwise_pwise") {
    return build_chain(in, {{LayerKind::Pwise, channels_of(shapes, 1, 32), 1, 1},
                            {LayerKind::Dwise, 0, r, 1},
                            {LayerKind::Pwise, channels_of(shapes, 3, 8), 1, 1}});
  }
  if (name == "fc_fc") {
    InputSpec fc{get(shapes, "C", 16), get(shapes, "B", 4), 1, false};
    return build_chain(fc, {{LayerKind::Fc, channels_of(shapes, 1, 16), 1, 1},
                            {LayerKind::Fc, channels_of(shapes, 2, 16), 1, 1}});
  }
  throw UnknownNameError("unknown fusion-set template " + name);
}

std::vector<std::string> template_names() { return {"conv_conv", "conv_conv_conv", "pwise_dwise_pwise", "fc_fc"}; }

}  // namespace fusedflow::templates
