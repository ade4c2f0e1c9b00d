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

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cprank/factors.hpp"
#include "cprank/tensor.hpp"

namespace cprank::testing {

/// Independent singular-value oracle: one-sided Jacobi orthogonalization.
/// Deliberately does not share any code path with the library's SVD.
inline std::vector<double> reference_singular_values(Eigen::MatrixXd a) {
  if (a.rows() < a.cols()) a = a.transpose().eval();
  const Eigen::Index n = a.cols();
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double app = a.col(i).squaredNorm();
        const double aqq = a.col(j).squaredNorm();
        const double apq = a.col(i).dot(a.col(j));
        if (std::abs(apq) <= 1e-15 * std::sqrt(app * aqq) || apq == 0.0) continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        const Eigen::VectorXd ai = a.col(i);
        a.col(i) = c * ai - s * a.col(j);
        a.col(j) = s * ai + c * a.col(j);
      }
    }
    if (!rotated) break;
  }
  std::vector<double> sv(n);
  for (Eigen::Index j = 0; j < n; ++j) sv[j] = a.col(j).norm();
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

/// Brute-force CP reconstruction of a single entry.
inline double cp_entry_oracle(const CPFactors& f, int p, int s, int t) {
  double acc = 0.0;
  for (int r = 0; r < f.rank; ++r) {
    acc += f.weights(r) * f.spatial(p, r) * f.input(s, r) * f.output(t, r);
  }
  return acc;
}

inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                       std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

/// L x M matrix with a planted rank-r signal of given singular values plus
/// i.i.d. gaussian noise of standard deviation noise_sigma.
inline Eigen::MatrixXd planted_matrix(int rows, int cols, int rank,
                                      const std::vector<double>& signal,
                                      double noise_sigma, std::mt19937_64& rng) {
  Eigen::MatrixXd u = gaussian_matrix(rows, rank, rng);
  Eigen::MatrixXd v = gaussian_matrix(cols, rank, rng);
  u = Eigen::HouseholderQR<Eigen::MatrixXd>(u).householderQ() *
      Eigen::MatrixXd::Identity(rows, rank);
  v = Eigen::HouseholderQR<Eigen::MatrixXd>(v).householderQ() *
      Eigen::MatrixXd::Identity(cols, rank);
  Eigen::MatrixXd m = gaussian_matrix(rows, cols, rng, noise_sigma);
  for (int r = 0; r < rank; ++r) {
    m += signal[r] * u.col(r) * v.col(r).transpose();
  }
  return m;
}

/// The known-sigma2 retention threshold sqrt(M * sigma2 * xbar).
inline double evb_threshold_oracle(int left_dim, int right_dim, double sigma2) {
  const int l = std::min(left_dim, right_dim);
  const int m = std::max(left_dim, right_dim);
  const double alpha = static_cast<double>(l) / m;
  const double taubar = 2.5129 * std::sqrt(alpha);
  return std::sqrt(m * sigma2 * (1.0 + taubar) * (1.0 + alpha / taubar));
}

/// Random CP factors obeying the normalization invariant.
inline CPFactors random_factors(int spatial, int inputs, int outputs, int rank,
                                std::mt19937_64& rng) {
  CPFactors f;
  f.rank = rank;
  f.spatial = gaussian_matrix(spatial, rank, rng);
  f.input = gaussian_matrix(inputs, rank, rng);
  f.output = gaussian_matrix(outputs, rank, rng);
  for (int r = 0; r < rank; ++r) {
    f.spatial.col(r).normalize();
    f.input.col(r).normalize();
    f.output.col(r).normalize();
  }
  f.weights = Eigen::VectorXd::Zero(rank);
  std::uniform_real_distribution<double> dist(0.5, 2.0);
  for (int r = 0; r < rank; ++r) f.weights(r) = dist(rng);
  std::sort(f.weights.data(), f.weights.data() + rank, std::greater<>());
  return f;
}

inline Tensor3 random_tensor(int spatial, int inputs, int outputs,
                             std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor3 t(spatial, inputs, outputs);
  for (double& v : t.data) v = dist(rng);
  return t;
}

inline Kernel4 random_kernel(int kh, int kw, int in_c, int out_c,
                             std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Kernel4 k(kh, kw, in_c, out_c);
  for (double& v : k.data) v = dist(rng);
  return k;
}

inline Activation random_activation(int channels, int h, int w,
                                    std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Activation a(channels, h, w);
  for (double& v : a.data) v = dist(rng);
  return a;
}

inline double rel_error(const std::vector<double>& got,
                        const std::vector<double>& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double d = got[i] - want[i];
    num += d * d;
    den += want[i] * want[i];
  }
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

/// Scratch directory removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cprank_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

}  // namespace cprank::testing
