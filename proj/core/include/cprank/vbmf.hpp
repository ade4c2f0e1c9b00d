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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cprank/tensor.hpp"

namespace cprank {

/// Result of the global analytic empirical-VB matrix factorization.
///
/// For an L x M matrix (L <= M after canonicalization) with singular values
/// gamma_1 >= ... >= gamma_L, let alpha = L/M, taubar = 2.5129*sqrt(alpha),
/// and xbar = (1 + taubar)(1 + alpha/taubar). Components are retained iff
///
///   gamma_h > threshold = sqrt(M * sigma2 * xbar)
///
/// (strict inequality; a value exactly at the boundary carries no evidence).
/// Retained components are shrunk to
///
///   gammahat_h = (gamma_h / 2) * (1 - (L+M) sigma2 / gamma_h^2
///                 + sqrt((1 - (L+M) sigma2 / gamma_h^2)^2
///                        - 4 L M sigma2^2 / gamma_h^4)).
struct RankEstimate {
  int rank = 0;
  double sigma2 = 0.0;
  double threshold = 0.0;
  std::vector<double> singular_values;  // descending, length min(L, M)
  std::vector<double> shrunk_values;    // length == rank
};

/// One per-group, per-mode estimate inside a layer report. `mode` is the
/// matricization mode (1..3), or 0 for the 2-way T x S*D*D treatment.
struct GroupModeEstimate {
  int group = 0;
  int mode = 0;
  RankEstimate estimate;
};

/// Per-layer rank report: the chosen rank is the maximum estimated rank over
/// all groups and modes, clamped to >= 1, and applies to every group.
struct LayerRankReport {
  std::string layer_id;
  bool two_way = false;
  bool clamped = false;  // every matricization estimated rank 0
  int chosen_rank = 1;
  std::vector<GroupModeEstimate> estimates;
};

/// Singular values of a real matrix, descending, length min(rows, cols).
/// Throws numeric_error on non-finite entries.
std::vector<double> singular_values(const Eigen::MatrixXd& m);

/// The noise objective Psi(sigma2) minimized by estimate_noise_evb.
///
/// With x_h = gamma_h^2 / (M sigma2) and
/// tau(x) = ((x - (1+alpha)) + sqrt((x - (1+alpha))^2 - 4 alpha)) / 2:
///
///   Psi = sum_{x_h <= xbar} (x_h - log x_h)
///       + sum_{x_h > xbar} [ x_h - tau(x_h) + log((tau(x_h)+1)/x_h)
///                            + alpha * log(tau(x_h)/alpha + 1) ]
///
/// The full spectrum is the candidate set, so there is no residual term.
/// Numerically-zero singular values (gamma_h <= 1e-15 * gamma_1) are skipped:
/// each contributes a sigma2-independent infinite term that would otherwise
/// drown the comparison.
double evb_objective(std::span<const double> gammas, int left_dim, int right_dim,
                     double sigma2);

/// Empirical-VB noise variance: minimizes evb_objective over the bracket
///   sigma2_hi = sum_h gamma_h^2 / (L*M)
///   sigma2_lo = max(gamma_{K+1}^2 / (M*xbar), mean_{h>K} gamma_h^2 / M),
///     K = min(ceil(L/(1+alpha)) - 1, L-1)  (1-based descending indices)
/// by a 200-point log grid followed by golden-section refinement in
/// log sigma2 to relative width 1e-8. All-zero spectra return 0.
double estimate_noise_evb(std::span<const double> gammas, int left_dim,
                          int right_dim);

/// Rank estimate from a precomputed spectrum. `left_dim` and `right_dim` are
/// the matrix dims in either order; canonicalization takes L = min, M = max.
RankEstimate evb_rank_from_spectrum(std::span<const double> gammas, int left_dim,
                                    int right_dim,
                                    std::optional<double> known_sigma2 = {});

/// Rank estimate for a matrix: SVD, noise estimation (unless known_sigma2 is
/// given), thresholding, shrinkage.
RankEstimate evb_rank(const Eigen::MatrixXd& m,
                      std::optional<double> known_sigma2 = {});

/// Rank selection for one convolutional layer. Each group tensor is estimated
/// on all three matricizations (or the single T x S*D*D matrix when two_way),
/// and the maximum rank over groups and modes is chosen, clamped to >= 1.
LayerRankReport layer_rank(const Kernel4& k, const ConvLayerSpec& spec,
                           bool two_way);

}  // namespace cprank
