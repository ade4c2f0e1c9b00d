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
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cprank/factors.hpp"
#include "cprank/tensor.hpp"

namespace cprank {

struct CpOptions {
  int max_sweeps = 500;
  double tol = 1e-6;  // relative fit change
  std::uint64_t seed = 0;
  int restarts = 5;
};

struct StackLayer {
  ConvLayerSpec spec;
  Kernel4 weights;
};

/// Replacement for one convolution layer: a two-layer (2-way case) or
/// three-layer (3-way case) stack of convolutions.
struct ConvStack {
  std::string source_id;
  int rank = 0;
  std::vector<StackLayer> layers;
};

/// Per-restart, per-sweep relative fit errors from one cp_als call.
struct CpTrace {
  std::vector<std::vector<double>> restart_fits;
};

/// Rank-R CP decomposition by alternating least squares. Minimizes the
/// squared Frobenius error of tensor_from_cp(f) - x; stops when the relative
/// fit change drops below opts.tol or opts.max_sweeps is reached. The best of
/// opts.restarts seeded random initializations is returned. Near-singular
/// normal equations are Tikhonov-regularized (1e-12, trace-scaled) rather
/// than aborted. Deterministic given opts.
CPFactors cp_als(const Tensor3& x, int rank, const CpOptions& opts = {},
                 CpTrace* trace = nullptr);

/// Rank-R CP decomposition by the greedy tensor power method: repeatedly
/// extract the dominant rank-1 component by alternating power iterations,
/// deflate, repeat. If the residual vanishes before R components, the
/// remaining components get machine-epsilon-scale weights and the result is
/// flagged degenerate. Same output contract as cp_als.
CPFactors cp_tpm(const Tensor3& x, int rank, const CpOptions& opts = {});

/// Maps CP factors onto the three-layer stack
///   1x1 (S -> R, stride 1, pad 0),
///   DxD depthwise over R channels (original stride and pad),
///   1x1 (R -> T, stride 1, pad 0; component weights folded in here).
/// One CPFactors per group; per-group stacks are re-assembled as grouped
/// stages (the depthwise stage has groups = g*R).
ConvStack factors_to_conv_stack(std::span<const CPFactors> per_group,
                                const ConvLayerSpec& spec);
ConvStack factors_to_conv_stack(const CPFactors& f, const ConvLayerSpec& spec);

/// Two-layer form for layers treated as a 2-way T x S*D*D matrix: rank-R
/// truncated SVD m ~ U_R S_R V_R^T mapped onto
///   DxD (S -> R, original stride and pad) with weights from V_R^T,
///   1x1 (R -> T) with weights U_R S_R.
/// One matrix per group, re-assembled as grouped stages.
ConvStack svd_two_layer(std::span<const Eigen::MatrixXd> per_group, int rank,
                        const ConvLayerSpec& spec);
ConvStack svd_two_layer(const Eigen::MatrixXd& m, int rank,
                        const ConvLayerSpec& spec);

/// Geometry of the replacement stack without computing any weights; used for
/// accounting. two_way selects the two-layer form.
std::vector<ConvLayerSpec> decomposed_stack_geometry(const ConvLayerSpec& spec,
                                                     int rank, bool two_way);

}  // namespace cprank
