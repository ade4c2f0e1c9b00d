/* Copyright 2026 The cprank Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cprank/tensor.hpp"

namespace cprank {

struct ModelManifest;

/// Weight and multiply-accumulate counts for one layer. One mult-add = 1 op;
/// biases and activations are ignored.
struct LayerCost {
  std::uint64_t params = 0;
  std::uint64_t multadds = 0;
};

struct LayerCostEntry {
  std::string id;
  LayerCost cost;
};

struct ModelStats {
  std::vector<LayerCostEntry> layers;
  LayerCost total;
  // baseline / this, when a baseline is given (e.g. 724M / 238M = x3.05).
  std::optional<double> params_ratio;
  std::optional<double> multadds_ratio;
};

// Convolution: D*D*S*T/g weights; fully-connected: in*out.
std::uint64_t layer_params(const ConvLayerSpec& spec);
std::uint64_t layer_params(std::uint64_t fc_in, std::uint64_t fc_out);

// Convolution: out_h*out_w*D*D*S*T/g; fully-connected: in*out.
std::uint64_t layer_multadds(const ConvLayerSpec& spec);
std::uint64_t layer_multadds(std::uint64_t fc_in, std::uint64_t fc_out);

ModelStats model_stats(const ModelManifest& manifest,
                       const ModelManifest* baseline = nullptr);

/// Largest R whose per-group decomposed stack S*R + D*D*R + R*T still has
/// fewer weights than the original D*D*S*T, i.e. R < D*D*S*T/(S + D*D + T)
/// with per-group channel counts. Returns 0 when no rank saves weights.
int compression_breakeven(const ConvLayerSpec& spec);

}  // namespace cprank
