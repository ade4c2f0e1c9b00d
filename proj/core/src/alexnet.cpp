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
#include "cprank/alexnet.hpp"

#include <algorithm>
#include <random>

#include "cprank/cpd.hpp"

namespace cprank {

namespace {

ConvLayerSpec conv_spec(const std::string& id, int kernel, int in_c, int out_c,
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
  s.out_h = conv_out_size(in_hw, kernel, stride, pad);
  s.out_w = s.out_h;
  s.validate();
  return s;
}

LayerRecord conv_record(const ConvLayerSpec& spec, bool two_way) {
  LayerRecord l;
  l.id = spec.id;
  l.kind = LayerKind::conv;
  l.conv = spec;
  l.two_way = two_way;
  return l;
}

LayerRecord fc_record(const std::string& id, int in, int out) {
  LayerRecord l;
  l.id = id;
  l.kind = LayerKind::fc;
  l.fc = {in, out};
  return l;
}

/// Low-rank-plus-noise weights (per group) so rank estimation on the fixture
/// has actual signal to find.
Kernel4 planted_kernel(const ConvLayerSpec& spec, int rank, std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<Kernel4> parts;
  for (int gi = 0; gi < spec.groups; ++gi) {
    CPFactors f;
    f.rank = rank;
    const int dd = spec.kernel * spec.kernel;
    f.spatial = Eigen::MatrixXd(dd, rank);
    f.input = Eigen::MatrixXd(spec.in_per_group(), rank);
    f.output = Eigen::MatrixXd(spec.out_per_group(), rank);
    f.weights = Eigen::VectorXd(rank);
    for (int r = 0; r < rank; ++r) {
      for (int i = 0; i < dd; ++i) f.spatial(i, r) = unit(rng);
      for (int i = 0; i < spec.in_per_group(); ++i) f.input(i, r) = unit(rng);
      for (int i = 0; i < spec.out_per_group(); ++i) f.output(i, r) = unit(rng);
      f.spatial.col(r).normalize();
      f.input.col(r).normalize();
      f.output.col(r).normalize();
      f.weights(r) = 30.0 - 15.0 * r / std::max(1, rank - 1);
    }
    Tensor3 t = tensor_from_cp(f);
    const double scale = 0.005 * t.frobenius_norm() / std::sqrt(double(t.size()));
    std::normal_distribution<double> noise(0.0, scale);
    for (double& v : t.data) v += noise(rng);
    parts.push_back(reshape_3way_to_kernel(t, spec.kernel, spec.kernel));
  }
  return concat_groups(parts);
}

// Kept within every mode dimension (the 3x3 layers have only 9 spatial
// rows) so an exact CP fit at the estimated rank is well-posed.
int planted_rank_for(const std::string& id) {
  if (id == "conv1") return 8;
  if (id == "conv2") return 10;
  return 7;
}

}  // namespace

ModelManifest alexnet_manifest(bool with_weights, std::uint64_t seed) {
  ModelManifest m;
  m.name = "alexnet";
  m.layers.push_back(conv_record(conv_spec("conv1", 11, 3, 96, 1, 4, 0, 227), true));
  m.layers.push_back(conv_record(conv_spec("conv2", 5, 96, 256, 2, 1, 2, 27), false));
  m.layers.push_back(conv_record(conv_spec("conv3", 3, 256, 384, 1, 1, 1, 13), false));
  m.layers.push_back(conv_record(conv_spec("conv4", 3, 384, 384, 2, 1, 1, 13), false));
  m.layers.push_back(conv_record(conv_spec("conv5", 3, 384, 256, 2, 1, 1, 13), false));
  m.layers.push_back(fc_record("fc6", 9216, 4096));
  m.layers.push_back(fc_record("fc7", 4096, 4096));
  m.layers.push_back(fc_record("fc8", 4096, 1000));
  if (with_weights) {
    std::mt19937_64 rng(seed);
    for (LayerRecord& l : m.layers) {
      if (l.kind == LayerKind::conv) {
        l.weights = std::make_shared<const Kernel4>(
            planted_kernel(l.conv, planted_rank_for(l.id), rng));
      }
    }
  }
  m.validate();
  return m;
}

const std::vector<std::pair<std::string, int>>& alexnet_reference_ranks() {
  static const std::vector<std::pair<std::string, int>> ranks = {
      {"conv1", 53}, {"conv2", 83}, {"conv3", 138}, {"conv4", 119}, {"conv5", 109}};
  return ranks;
}

ModelManifest alexnet_compressed_manifest(bool compress_conv1) {
  ModelManifest m = alexnet_manifest();
  ModelManifest out;
  out.name = m.name + "-compressed";
  for (const LayerRecord& l : m.layers) {
    int rank = 0;
    for (const auto& [id, r] : alexnet_reference_ranks()) {
      if (id == l.id) rank = r;
    }
    if (l.kind != LayerKind::conv || rank == 0 ||
        (l.id == "conv1" && !compress_conv1)) {
      out.layers.push_back(l);
      continue;
    }
    for (const ConvLayerSpec& stage :
         decomposed_stack_geometry(l.conv, rank, l.two_way)) {
      LayerRecord r = conv_record(stage, false);
      r.decomposed = true;
      r.provenance = Provenance{l.id, rank, l.two_way ? "svd" : "als",
                                static_cast<int>(out.layers.size()), ""};
      out.layers.push_back(std::move(r));
    }
  }
  // Re-number stages within each provenance group.
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    if (!out.layers[i].provenance) continue;
    int stage = 1;
    for (std::size_t j = 0; j < i; ++j) {
      if (out.layers[j].provenance &&
          out.layers[j].provenance->source == out.layers[i].provenance->source) {
        ++stage;
      }
    }
    out.layers[i].provenance->stage = stage;
  }
  out.validate();
  return out;
}

}  // namespace cprank
