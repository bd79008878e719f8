// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

// Builders for chains of convolution, pointwise, depthwise and
// fully-connected layers.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "fusedflow/workload.hpp"

namespace fusedflow::templates {

enum class LayerKind { Conv, Pwise, Dwise, Fc };

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  Coord out_channels = 1;  ///< ignored for depthwise layers
  Coord kernel = 3;        ///< R (and S for 2-D); conv and depthwise only
  Coord stride = 1;
};

struct InputSpec {
  Coord channels = 1;
  Coord height = 1;  ///< rows for spatial chains, batch for fc chains
  Coord width = 1;   ///< used when two_d is set
  bool two_d = true;
};

/// Layer k (1-based) reads Fmap{k}, writes Fmap{k+1} and owns Filter{k};
/// its ranks carry the suffix k (M1, P1, ...). An fc chain uses rank B{k}
/// for the batch.
workload::FusionSet build_chain(const InputSpec& in, const std::vector<LayerSpec>& layers);

/// Named fusion-set templates: conv_conv, pwise_dwise_pwise, fc_fc,
/// conv_conv_conv. Recognized shape keys: C, H, W, M (or M1, M2, ...), R,
/// and B for fc chains. Missing keys take repo defaults.
workload::FusionSet named_template(const std::string& name, const std::map<std::string, Coord>& shapes = {});

std::vector<std::string> template_names();

}  // namespace fusedflow::templates
