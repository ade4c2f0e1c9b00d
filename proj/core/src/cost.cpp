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
#include "cprank/cost.hpp"

#include "cprank/manifest.hpp"

namespace cprank {

std::uint64_t layer_params(const ConvLayerSpec& spec) {
  spec.validate();
  const std::uint64_t dd = static_cast<std::uint64_t>(spec.kernel) * spec.kernel;
  return dd * spec.in_channels * spec.out_channels / spec.groups;
}

std::uint64_t layer_params(std::uint64_t fc_in, std::uint64_t fc_out) {
  return fc_in * fc_out;
}

std::uint64_t layer_multadds(const ConvLayerSpec& spec) {
  return layer_params(spec) * static_cast<std::uint64_t>(spec.out_h) * spec.out_w;
}

std::uint64_t layer_multadds(std::uint64_t fc_in, std::uint64_t fc_out) {
  return fc_in * fc_out;
}

ModelStats model_stats(const ModelManifest& manifest, const ModelManifest* baseline) {
  manifest.validate();
  ModelStats stats;
  for (const LayerRecord& l : manifest.layers) {
    LayerCost cost;
    if (l.kind == LayerKind::conv) {
      ConvLayerSpec spec = l.conv;
      spec.id = l.id;
      cost.params = layer_params(spec);
      cost.multadds = layer_multadds(spec);
    } else {
      cost.params = layer_params(l.fc.in, l.fc.out);
      cost.multadds = layer_multadds(l.fc.in, l.fc.out);
    }
    stats.total.params += cost.params;
    stats.total.multadds += cost.multadds;
    stats.layers.push_back({l.id, cost});
  }
  if (baseline != nullptr) {
    const ModelStats base = model_stats(*baseline);
    if (stats.total.params > 0) {
      stats.params_ratio =
          static_cast<double>(base.total.params) / static_cast<double>(stats.total.params);
    }
    if (stats.total.multadds > 0) {
      stats.multadds_ratio = static_cast<double>(base.total.multadds) /
                             static_cast<double>(stats.total.multadds);
    }
  }
  return stats;
}

int compression_breakeven(const ConvLayerSpec& spec) {
  spec.validate();
  const std::uint64_t dd = static_cast<std::uint64_t>(spec.kernel) * spec.kernel;
  const std::uint64_t s = spec.in_per_group();
  const std::uint64_t t = spec.out_per_group();
  const std::uint64_t original = dd * s * t;
  const std::uint64_t per_rank = s + dd + t;
  if (original == 0) return 0;
  return static_cast<int>((original - 1) / per_rank);
}

}  // namespace cprank
