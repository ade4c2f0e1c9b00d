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

#include <Eigen/Core>

namespace cprank {

/// Rank-R factorization of a kernel tensor as a sum of rank-1 terms:
///   x[p][s][t] = sum_r weights[r] * spatial(p, r) * input(s, r) * output(t, r)
///
/// Factor columns have unit Euclidean norm; the norms are folded into
/// `weights`, which is positive and sorted non-increasing.
struct CPFactors {
  int rank = 0;
  Eigen::MatrixXd spatial;  // (D*D) x R
  Eigen::MatrixXd input;    // S x R
  Eigen::MatrixXd output;   // T x R
  Eigen::VectorXd weights;  // R, positive, non-increasing
  double fit_error = 0.0;   // final relative reconstruction error
  bool degenerate = false;  // some components were pad-filled after an exact fit
};

}  // namespace cprank
