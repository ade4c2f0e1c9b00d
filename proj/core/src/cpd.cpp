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
#include "cprank/cpd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace cprank {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Column-wise Khatri-Rao product; row index = i_slow * fast.rows() + i_fast.
MatrixXd khatri_rao(const MatrixXd& slow, const MatrixXd& fast) {
  const Eigen::Index r = slow.cols();
  MatrixXd out(slow.rows() * fast.rows(), r);
  for (Eigen::Index j = 0; j < r; ++j) {
    for (Eigen::Index i = 0; i < slow.rows(); ++i) {
      out.block(i * fast.rows(), j, fast.rows(), 1) = slow(i, j) * fast.col(j);
    }
  }
  return out;
}

/// Solves X * G = B row-wise, i.e. returns B * G^{-1}, with G symmetric PSD.
/// Near-singular Gram matrices get a trace-scaled Tikhonov ridge.
MatrixXd solve_gram(const MatrixXd& gram, const MatrixXd& rhs) {
  Eigen::LDLT<MatrixXd> ldlt(gram);
  if (ldlt.info() == Eigen::Success && ldlt.rcond() > 1e-10) {
    return ldlt.solve(rhs.transpose()).transpose();
  }
  const double ridge =
      1e-12 * std::max(gram.trace() / gram.rows(), std::numeric_limits<double>::min());
  MatrixXd g = gram;
  g.diagonal().array() += ridge;
  return g.ldlt().solve(rhs.transpose()).transpose();
}

/// Normalizes columns in place, returning the norms. Zero columns become e_1
/// with the smallest positive weight so the weight invariant holds.
VectorXd normalize_columns(MatrixXd& m) {
  VectorXd norms(m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double n = m.col(j).norm();
    if (n > 0.0) {
      m.col(j) /= n;
      norms(j) = n;
    } else {
      m.col(j).setZero();
      m(0, j) = 1.0;
      norms(j) = std::numeric_limits<double>::min();
    }
  }
  return norms;
}

void sort_components(CPFactors& f) {
  std::vector<int> order(f.rank);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return f.weights(a) > f.weights(b); });
  CPFactors sorted = f;
  for (int j = 0; j < f.rank; ++j) {
    sorted.spatial.col(j) = f.spatial.col(order[j]);
    sorted.input.col(j) = f.input.col(order[j]);
    sorted.output.col(j) = f.output.col(order[j]);
    sorted.weights(j) = f.weights(order[j]);
  }
  f = std::move(sorted);
}

MatrixXd random_factor(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

struct Unfoldings {
  MatrixXd m1;  // T x S*DD
  MatrixXd m2;  // S x T*DD
  MatrixXd m3;  // DD x T*S
};

Unfoldings unfold_all(const Tensor3& x) {
  return {matricize(x, 1).m, matricize(x, 2).m, matricize(x, 3).m};
}

double fit_error_from(const CPFactors& f, const MatrixXd& mttkrp_out,
                      double norm_x) {
  // ||x - xhat||^2 = ||x||^2 - 2 <x, xhat> + ||xhat||^2, all via Gram algebra.
  const MatrixXd gram = (f.spatial.transpose() * f.spatial)
                            .cwiseProduct(f.input.transpose() * f.input)
                            .cwiseProduct(f.output.transpose() * f.output);
  double inner = 0.0;
  for (int r = 0; r < f.rank; ++r) {
    inner += f.weights(r) * f.output.col(r).dot(mttkrp_out.col(r));
  }
  const double model2 = f.weights.dot(gram * f.weights);
  const double res2 = std::max(0.0, norm_x * norm_x - 2.0 * inner + model2);
  return std::sqrt(res2) / norm_x;
}

}  // namespace

CPFactors cp_als(const Tensor3& x, int rank, const CpOptions& opts,
                 CpTrace* trace) {
  x.validate();
  if (rank < 1) throw validation_error("cp_als: rank must be >= 1");
  const double norm_x = x.frobenius_norm();
  if (norm_x == 0.0) throw validation_error("cp_als: tensor is zero");

  const Unfoldings u = unfold_all(x);
  CPFactors best;
  best.fit_error = std::numeric_limits<double>::infinity();
  if (trace != nullptr) trace->restart_fits.clear();

  for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
    std::mt19937_64 rng(opts.seed + static_cast<std::uint64_t>(restart));
    CPFactors f;
    f.rank = rank;
    f.spatial = random_factor(x.spatial, rank, rng);
    f.input = random_factor(x.inputs, rank, rng);
    f.output = random_factor(x.outputs, rank, rng);
    normalize_columns(f.spatial);
    normalize_columns(f.input);
    normalize_columns(f.output);
    f.weights = VectorXd::Ones(rank);

    double prev_fit = std::numeric_limits<double>::infinity();
    std::vector<double> fits;
    MatrixXd mttkrp_out;
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
      // Each block solve absorbs the component weights into the updated
      // factor; normalization pulls them back out.
      MatrixXd kr = khatri_rao(f.output, f.input);
      MatrixXd gram = (f.output.transpose() * f.output)
                          .cwiseProduct(f.input.transpose() * f.input);
      f.spatial = solve_gram(gram, u.m3 * kr);
      normalize_columns(f.spatial);

      kr = khatri_rao(f.output, f.spatial);
      gram = (f.output.transpose() * f.output)
                 .cwiseProduct(f.spatial.transpose() * f.spatial);
      f.input = solve_gram(gram, u.m2 * kr);
      normalize_columns(f.input);

      kr = khatri_rao(f.input, f.spatial);
      gram = (f.input.transpose() * f.input)
                 .cwiseProduct(f.spatial.transpose() * f.spatial);
      mttkrp_out = u.m1 * kr;
      f.output = solve_gram(gram, mttkrp_out);
      f.weights = normalize_columns(f.output);

      f.fit_error = fit_error_from(f, mttkrp_out, norm_x);
      fits.push_back(f.fit_error);
      if (std::abs(prev_fit - f.fit_error) < opts.tol) break;
      prev_fit = f.fit_error;
    }
    if (trace != nullptr) trace->restart_fits.push_back(std::move(fits));
    if (f.fit_error < best.fit_error) best = std::move(f);
  }

  for (int r = 0; r < best.rank; ++r) {
    if (!(best.weights(r) > 0.0)) best.weights(r) = std::numeric_limits<double>::min();
  }
  sort_components(best);
  return best;
}

CPFactors cp_tpm(const Tensor3& x, int rank, const CpOptions& opts) {
  x.validate();
  if (rank < 1) throw validation_error("cp_tpm: rank must be >= 1");
  const double norm_x = x.frobenius_norm();

  CPFactors f;
  f.rank = rank;
  f.spatial = MatrixXd::Zero(x.spatial, rank);
  f.input = MatrixXd::Zero(x.inputs, rank);
  f.output = MatrixXd::Zero(x.outputs, rank);
  f.weights = VectorXd::Zero(rank);

  Tensor3 residual = x;
  const double vanish = 1e-14 * norm_x;
  int extracted = 0;
  for (int comp = 0; comp < rank; ++comp) {
    if (residual.frobenius_norm() <= vanish) break;
    const Unfoldings u = unfold_all(residual);

    VectorXd best_a, best_b, best_c;
    double best_lambda = -1.0;
    for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
      std::mt19937_64 rng(opts.seed + 7919u * static_cast<std::uint64_t>(comp + 1) +
                          static_cast<std::uint64_t>(restart));
      VectorXd b = random_factor(x.inputs, 1, rng).col(0).normalized();
      VectorXd c = random_factor(x.outputs, 1, rng).col(0).normalized();
      VectorXd a = VectorXd::Zero(x.spatial);
      double lambda = 0.0, prev_lambda = -1.0;
      for (int it = 0; it < opts.max_sweeps; ++it) {
        a = u.m3 * khatri_rao(c, b);  // rank-1 Khatri-Rao is a Kronecker vector
        if (a.norm() == 0.0) break;
        a.normalize();
        b = u.m2 * khatri_rao(c, a);
        if (b.norm() == 0.0) break;
        b.normalize();
        VectorXd c_raw = u.m1 * khatri_rao(b, a);
        lambda = c_raw.norm();
        if (lambda == 0.0) break;
        c = c_raw / lambda;
        if (std::abs(lambda - prev_lambda) <= opts.tol * std::max(1.0, lambda)) break;
        prev_lambda = lambda;
      }
      if (lambda > best_lambda) {
        best_lambda = lambda;
        best_a = a;
        best_b = b;
        best_c = c;
      }
    }
    if (best_lambda <= 0.0) break;

    f.spatial.col(comp) = best_a;
    f.input.col(comp) = best_b;
    f.output.col(comp) = best_c;
    f.weights(comp) = best_lambda;
    ++extracted;

    for (int p = 0; p < x.spatial; ++p)
      for (int s = 0; s < x.inputs; ++s)
        for (int t = 0; t < x.outputs; ++t)
          residual.at(p, s, t) -= best_lambda * best_a(p) * best_b(s) * best_c(t);
  }

  if (extracted < rank) {
    f.degenerate = true;
    for (int comp = extracted; comp < rank; ++comp) {
      f.spatial(0, comp) = 1.0;
      f.input(0, comp) = 1.0;
      f.output(0, comp) = 1.0;
      f.weights(comp) = std::numeric_limits<double>::epsilon();
    }
  }

  f.fit_error = norm_x == 0.0 ? 0.0 : residual.frobenius_norm() / norm_x;
  sort_components(f);
  return f;
}

namespace {

ConvLayerSpec stage_spec(const ConvLayerSpec& src, const std::string& suffix,
                         int kernel, int in_c, int out_c, int groups, int stride,
                         int pad, int in_h, int in_w) {
  ConvLayerSpec s;
  s.id = src.id + suffix;
  s.kernel = kernel;
  s.in_channels = in_c;
  s.out_channels = out_c;
  s.groups = groups;
  s.stride = stride;
  s.pad = pad;
  s.in_h = in_h;
  s.in_w = in_w;
  s.out_h = conv_out_size(in_h, kernel, stride, pad);
  s.out_w = conv_out_size(in_w, kernel, stride, pad);
  s.validate();
  return s;
}

}  // namespace

ConvStack factors_to_conv_stack(std::span<const CPFactors> per_group,
                                const ConvLayerSpec& spec) {
  spec.validate();
  const int g = spec.groups;
  if (static_cast<int>(per_group.size()) != g) {
    throw validation_error("factors_to_conv_stack: need one CPFactors per group");
  }
  const int rank = per_group[0].rank;
  const int dd = spec.kernel * spec.kernel;
  for (const CPFactors& f : per_group) {
    if (f.rank != rank) {
      throw validation_error("factors_to_conv_stack: per-group ranks differ");
    }
    if (f.spatial.rows() != dd || f.input.rows() != spec.in_per_group() ||
        f.output.rows() != spec.out_per_group()) {
      throw validation_error("factors_to_conv_stack: factor dims do not match spec");
    }
  }

  ConvStack stack;
  stack.source_id = spec.id;
  stack.rank = rank;

  // 1x1 reduction S -> g*R at the input resolution.
  StackLayer reduce;
  reduce.spec = stage_spec(spec, "_reduce", 1, spec.in_channels, g * rank, g, 1, 0,
                           spec.in_h, spec.in_w);
  reduce.weights = Kernel4(1, 1, spec.in_per_group(), g * rank);
  for (int gi = 0; gi < g; ++gi)
    for (int s = 0; s < spec.in_per_group(); ++s)
      for (int r = 0; r < rank; ++r)
        reduce.weights.at(0, 0, s, gi * rank + r) = per_group[gi].input(s, r);

  // Depthwise DxD over g*R channels; carries the original stride and pad.
  StackLayer spatial;
  spatial.spec = stage_spec(spec, "_spatial", spec.kernel, g * rank, g * rank,
                            g * rank, spec.stride, spec.pad, spec.in_h, spec.in_w);
  spatial.weights = Kernel4(spec.kernel, spec.kernel, 1, g * rank);
  for (int gi = 0; gi < g; ++gi)
    for (int row = 0; row < spec.kernel; ++row)
      for (int col = 0; col < spec.kernel; ++col)
        for (int r = 0; r < rank; ++r)
          spatial.weights.at(row, col, 0, gi * rank + r) =
              per_group[gi].spatial(row * spec.kernel + col, r);

  // 1x1 expansion g*R -> T at the output resolution; lambda folded in here.
  StackLayer expand;
  expand.spec = stage_spec(spec, "_expand", 1, g * rank, spec.out_channels, g, 1, 0,
                           spec.out_h, spec.out_w);
  expand.weights = Kernel4(1, 1, rank, spec.out_channels);
  for (int gi = 0; gi < g; ++gi)
    for (int r = 0; r < rank; ++r)
      for (int t = 0; t < spec.out_per_group(); ++t)
        expand.weights.at(0, 0, r, gi * spec.out_per_group() + t) =
            per_group[gi].weights(r) * per_group[gi].output(t, r);

  stack.layers = {std::move(reduce), std::move(spatial), std::move(expand)};
  return stack;
}

ConvStack factors_to_conv_stack(const CPFactors& f, const ConvLayerSpec& spec) {
  return factors_to_conv_stack(std::span<const CPFactors>(&f, 1), spec);
}

ConvStack svd_two_layer(std::span<const Eigen::MatrixXd> per_group, int rank,
                        const ConvLayerSpec& spec) {
  spec.validate();
  const int g = spec.groups;
  if (static_cast<int>(per_group.size()) != g) {
    throw validation_error("svd_two_layer: need one matrix per group");
  }
  const int dd = spec.kernel * spec.kernel;
  const Eigen::Index rows = spec.out_per_group();
  const Eigen::Index cols = static_cast<Eigen::Index>(spec.in_per_group()) * dd;
  if (rank < 1 || rank > std::min(rows, cols)) {
    throw validation_error("svd_two_layer: rank out of range");
  }

  ConvStack stack;
  stack.source_id = spec.id;
  stack.rank = rank;

  StackLayer spatial;
  spatial.spec = stage_spec(spec, "_spatial", spec.kernel, spec.in_channels,
                            g * rank, g, spec.stride, spec.pad, spec.in_h, spec.in_w);
  spatial.weights = Kernel4(spec.kernel, spec.kernel, spec.in_per_group(), g * rank);

  StackLayer expand;
  expand.spec = stage_spec(spec, "_expand", 1, g * rank, spec.out_channels, g, 1, 0,
                           spec.out_h, spec.out_w);
  expand.weights = Kernel4(1, 1, rank, spec.out_channels);

  for (int gi = 0; gi < g; ++gi) {
    const Eigen::MatrixXd& m = per_group[gi];
    if (m.rows() != rows || m.cols() != cols) {
      throw validation_error("svd_two_layer: matrix shape does not match spec");
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::MatrixXd& u = svd.matrixU();
    const Eigen::MatrixXd& v = svd.matrixV();
    const Eigen::VectorXd& sv = svd.singularValues();
    for (int s = 0; s < spec.in_per_group(); ++s)
      for (int row = 0; row < spec.kernel; ++row)
        for (int col = 0; col < spec.kernel; ++col)
          for (int r = 0; r < rank; ++r)
            spatial.weights.at(row, col, s, gi * rank + r) =
                v(static_cast<Eigen::Index>(s) * dd + row * spec.kernel + col, r);
    for (int r = 0; r < rank; ++r)
      for (int t = 0; t < spec.out_per_group(); ++t)
        expand.weights.at(0, 0, r, gi * spec.out_per_group() + t) = u(t, r) * sv(r);
  }

  stack.layers = {std::move(spatial), std::move(expand)};
  return stack;
}

ConvStack svd_two_layer(const Eigen::MatrixXd& m, int rank,
                        const ConvLayerSpec& spec) {
  if (spec.groups != 1) {
    throw validation_error("svd_two_layer: single-matrix form needs groups=1");
  }
  return svd_two_layer(std::span<const Eigen::MatrixXd>(&m, 1), rank, spec);
}

std::vector<ConvLayerSpec> decomposed_stack_geometry(const ConvLayerSpec& spec,
                                                     int rank, bool two_way) {
  spec.validate();
  if (rank < 1) throw validation_error("decomposed_stack_geometry: rank must be >= 1");
  const int g = spec.groups;
  std::vector<ConvLayerSpec> out;
  if (two_way) {
    out.push_back(stage_spec(spec, "_spatial", spec.kernel, spec.in_channels,
                             g * rank, g, spec.stride, spec.pad, spec.in_h,
                             spec.in_w));
    out.push_back(stage_spec(spec, "_expand", 1, g * rank, spec.out_channels, g, 1,
                             0, spec.out_h, spec.out_w));
  } else {
    out.push_back(stage_spec(spec, "_reduce", 1, spec.in_channels, g * rank, g, 1,
                             0, spec.in_h, spec.in_w));
    out.push_back(stage_spec(spec, "_spatial", spec.kernel, g * rank, g * rank,
                             g * rank, spec.stride, spec.pad, spec.in_h,
                             spec.in_w));
    out.push_back(stage_spec(spec, "_expand", 1, g * rank, spec.out_channels, g, 1,
                             0, spec.out_h, spec.out_w));
  }
  return out;
}

}  // namespace cprank
