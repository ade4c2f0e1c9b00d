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

#include <random>
#include <string>

#include "cprank/manifest.hpp"
#include "test_support.hpp"

namespace cprank::testing {

inline ConvLayerSpec toy_spec(const std::string& id, int kernel, int in_c, int out_c,
                              int groups, int stride, int pad, int in_hw) {
  ConvLayerSpec s;
  s.id = id;
  s.kernel = kernel;
  s.in_channels = in_c;
  s.out_channels = out_c;
  s.groups = groups;
  s.stride = stride;
  s.pad = pad;
  s.in_h = s.in_w = in_hw;
  s.out_h = s.out_w = conv_out_size(in_hw, kernel, stride, pad);
  return s;
}

/// Low-rank-plus-noise kernel so VBMF picks a small, stable rank.
inline Kernel4 structured_kernel(const ConvLayerSpec& spec, int rank,
                                 std::mt19937_64& rng) {
  std::vector<Kernel4> parts;
  for (int gi = 0; gi < spec.groups; ++gi) {
    CPFactors f = random_factors(spec.kernel * spec.kernel, spec.in_per_group(),
                                 spec.out_per_group(), rank, rng);
    f.weights *= 25.0;
    Tensor3 t = tensor_from_cp(f);
    const double scale = 0.005 * t.frobenius_norm() / std::sqrt(double(t.size()));
    std::normal_distribution<double> noise(0.0, scale);
    for (double& v : t.data) v += noise(rng);
    parts.push_back(reshape_3way_to_kernel(t, spec.kernel, spec.kernel));
  }
  return concat_groups(parts);
}

inline LayerRecord toy_conv_record(const ConvLayerSpec& spec, const Kernel4& weights) {
  LayerRecord l;
  l.id = spec.id;
  l.kind = LayerKind::conv;
  l.conv = spec;
  l.weights = std::make_shared<const Kernel4>(weights);
  return l;
}

/// Three conv layers (one grouped) plus one fc layer, deterministic per seed.
inline ModelManifest toy_manifest(std::uint64_t seed = 9000) {
  std::mt19937_64 rng(seed);
  ModelManifest m;
  m.name = "toy";
  const ConvLayerSpec a = toy_spec("conv_a", 3, 8, 10, 1, 1, 1, 12);
  const ConvLayerSpec b = toy_spec("conv_b", 3, 10, 12, 2, 1, 1, 12);
  const ConvLayerSpec c = toy_spec("conv_c", 1, 12, 6, 1, 1, 0, 12);
  m.layers.push_back(toy_conv_record(a, structured_kernel(a, 3, rng)));
  m.layers.push_back(toy_conv_record(b, structured_kernel(b, 2, rng)));
  m.layers.push_back(toy_conv_record(c, structured_kernel(c, 2, rng)));
  LayerRecord fc;
  fc.id = "fc_d";
  fc.kind = LayerKind::fc;
  fc.fc = {864, 10};
  m.layers.push_back(fc);
  m.validate();
  return m;
}

}  // namespace cprank::testing
