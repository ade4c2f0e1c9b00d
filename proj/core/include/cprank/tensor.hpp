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

#include <string>
#include <vector>

#include <Eigen/Core>

#include "cprank/errors.hpp"
#include "cprank/factors.hpp"

namespace cprank {

/// Convolution weights as a dense 3-way tensor of shape (D*D) x S x T.
/// The first axis linearizes the filter window row-major: p = row * D + col.
/// Data is C-order with the last axis fastest.
struct Tensor3 {
  int spatial = 0;  // D*D
  int inputs = 0;   // S
  int outputs = 0;  // T
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int spatial_dim, int input_dim, int output_dim)
      : spatial(spatial_dim), inputs(input_dim), outputs(output_dim),
        data(static_cast<std::size_t>(spatial_dim) * input_dim * output_dim, 0.0) {}

  double& at(int p, int s, int t) {
    return data[(static_cast<std::size_t>(p) * inputs + s) * outputs + t];
  }
  double at(int p, int s, int t) const {
    return data[(static_cast<std::size_t>(p) * inputs + s) * outputs + t];
  }
  std::size_t size() const { return data.size(); }

  /// Checks dims, length, and entry finiteness; throws on violation.
  void validate() const;

  double frobenius_norm() const;
};

/// Raw 4-way convolution kernel of shape (kh, kw, in_c, out_c), C-order,
/// out_c fastest. For a grouped layer in_c is the per-group channel count.
struct Kernel4 {
  int kh = 0, kw = 0, in_c = 0, out_c = 0;
  std::vector<double> data;

  Kernel4() = default;
  Kernel4(int h, int w, int in_channels, int out_channels)
      : kh(h), kw(w), in_c(in_channels), out_c(out_channels),
        data(static_cast<std::size_t>(h) * w * in_channels * out_channels, 0.0) {}

  double& at(int r, int c, int s, int t) {
    return data[((static_cast<std::size_t>(r) * kw + c) * in_c + s) * out_c + t];
  }
  double at(int r, int c, int s, int t) const {
    return data[((static_cast<std::size_t>(r) * kw + c) * in_c + s) * out_c + t];
  }
  std::size_t size() const { return data.size(); }

  void validate() const;
};

/// One unfolding of a Tensor3. Modes:
///   1: outputs x (inputs * spatial),  M(t, s*DD + p)
///   2: inputs  x (outputs * spatial), M(s, t*DD + p)
///   3: spatial x (outputs * inputs),  M(p, t*S + s)
/// Origin dims are kept so the unfolding can be folded back exactly.
struct Matricization {
  int mode = 0;
  Eigen::MatrixXd m;
  int src_spatial = 0, src_inputs = 0, src_outputs = 0;
};

/// Geometry of one convolution layer. `kernel` is the square filter size,
/// `groups` partitions channels into independent blocks.
struct ConvLayerSpec {
  std::string id;
  int kernel = 1;
  int in_channels = 1;
  int out_channels = 1;
  int groups = 1;
  int stride = 1;
  int pad = 0;
  int in_h = 0, in_w = 0;
  int out_h = 0, out_w = 0;

  int in_per_group() const { return in_channels / groups; }
  int out_per_group() const { return out_channels / groups; }

  /// Checks divisibility by groups and the output-size formula
  /// out = floor((in + 2*pad - kernel) / stride) + 1.
  void validate() const;
};

/// Output spatial size for one axis.
int conv_out_size(int in, int kernel, int stride, int pad);

/// Dense 3-D activation of shape (channels, h, w), C-order, w fastest.
struct Activation {
  int channels = 0, h = 0, w = 0;
  std::vector<double> data;

  Activation() = default;
  Activation(int c, int height, int width)
      : channels(c), h(height), w(width),
        data(static_cast<std::size_t>(c) * height * width, 0.0) {}

  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * h + y) * w + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * h + y) * w + x];
  }
};

/// Combines the two filter-window axes into one: result[row*D + col][s][t].
Tensor3 reshape_kernel_to_3way(const Kernel4& k);

/// Inverse of reshape_kernel_to_3way; kh * kw must equal x.spatial.
Kernel4 reshape_3way_to_kernel(const Tensor3& x, int kh, int kw);

Matricization matricize(const Tensor3& x, int mode);

/// Exact inverse of matricize for every mode.
Tensor3 fold(const Matricization& m);

/// Splits a grouped layer's kernel into per-group kernels. The stored kernel
/// of a grouped layer already has in_c = S/g, so the split slices the output
/// axis: group i covers output channels [i*T/g, (i+1)*T/g).
std::vector<Kernel4> split_groups(const Kernel4& k, const ConvLayerSpec& spec);

/// Inverse of split_groups: concatenates along the output-channel axis.
Kernel4 concat_groups(const std::vector<Kernel4>& parts);

/// Reconstructs the dense tensor from CP factors.
Tensor3 tensor_from_cp(const CPFactors& f);

/// Direct (naive) grouped convolution with zero padding and no bias.
/// A correctness oracle, not a performance path.
Activation conv_forward(const Activation& input, const ConvLayerSpec& spec,
                        const Kernel4& k);

}  // namespace cprank
