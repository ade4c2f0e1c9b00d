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
#include <doctest.h>

#include <cmath>
#include <random>

#include "cprank/tensor.hpp"
#include "cprank/vbmf.hpp"
#include "test_support.hpp"

using namespace cprank;
using namespace cprank::testing;

TEST_SUITE("vbmf") {

TEST_CASE("singular values of a diagonal matrix") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 0) = 3.0;
  m(1, 1) = 2.0;
  const auto sv = singular_values(m);
  REQUIRE(sv.size() == 2);
  CHECK(sv[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(sv[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("singular values of a zero matrix") {
  const auto sv = singular_values(Eigen::MatrixXd::Zero(4, 7));
  REQUIRE(sv.size() == 4);
  for (double g : sv) CHECK(g == 0.0);
}

TEST_CASE("spectrum satisfies the Frobenius identity") {
  std::mt19937_64 rng(101);
  const Eigen::MatrixXd m = gaussian_matrix(10, 10, rng);
  const auto sv = singular_values(m);
  double sum2 = 0.0;
  for (double g : sv) sum2 += g * g;
  double frob2 = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) frob2 += m(i, j) * m(i, j);
  CHECK(sum2 == doctest::Approx(frob2).epsilon(1e-10));
}

TEST_CASE("spectrum matches an independent Jacobi oracle") {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 10; ++trial) {
    const int rows = 3 + trial;
    const int cols = 5 + (trial % 4);
    const Eigen::MatrixXd m = gaussian_matrix(rows, cols, rng);
    const auto got = singular_values(m);
    const auto want = reference_singular_values(m);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("singular_values rejects non-finite input") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(singular_values(m), numeric_error);
}

TEST_CASE("all-zero spectrum gives zero noise and rank zero") {
  CHECK(estimate_noise_evb(std::vector<double>{0.0, 0.0, 0.0}, 3, 5) == 0.0);
  const RankEstimate est = evb_rank(Eigen::MatrixXd::Zero(5, 8));
  CHECK(est.rank == 0);
  CHECK(est.sigma2 == 0.0);
  CHECK(est.shrunk_values.empty());
}

TEST_CASE("noise variance recovered on pure-noise matrices") {
  std::mt19937_64 rng(107);
  for (const double var : {0.25, 1.0, 4.0}) {
    int hits = 0;
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::MatrixXd m = gaussian_matrix(100, 200, rng, std::sqrt(var));
      const auto sv = singular_values(m);
      const double got = estimate_noise_evb(sv, 100, 200);
      if (std::abs(got - var) <= 0.15 * var) ++hits;
    }
    CHECK(hits >= 9);
  }
}

TEST_CASE("noise variance recovered under a planted strong signal") {
  std::mt19937_64 rng(109);
  const double threshold = evb_threshold_oracle(100, 200, 1.0);
  const std::vector<double> signal(5, 10.0 * threshold);
  int hits = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd m = planted_matrix(100, 200, 5, signal, 1.0, rng);
    const double got = estimate_noise_evb(singular_values(m), 100, 200);
    if (std::abs(got - 1.0) <= 0.15) ++hits;
  }
  CHECK(hits >= 9);
}

TEST_CASE("estimated noise beats a log-grid scan of the objective") {
  std::mt19937_64 rng(113);
  const Eigen::MatrixXd m = gaussian_matrix(60, 90, rng);
  const auto sv = singular_values(m);
  const double s2 = estimate_noise_evb(sv, 60, 90);
  const double psi_hat = evb_objective(sv, 60, 90, s2);
  double sum2 = 0.0;
  for (double g : sv) sum2 += g * g;
  const double hi = sum2 / (60.0 * 90.0);
  const double lo = hi * 1e-6;
  for (int i = 0; i < 1000; ++i) {
    const double u = std::log(lo) + (std::log(hi) - std::log(lo)) * i / 999.0;
    CHECK(psi_hat <= evb_objective(sv, 60, 90, std::exp(u)) + 1e-9 * std::abs(psi_hat));
  }
}

TEST_CASE("planted rank recovered with unknown noise") {
  std::mt19937_64 rng(127);
  const double threshold = evb_threshold_oracle(100, 200, 1.0);
  for (const int rank : {1, 10}) {
    const std::vector<double> signal(rank, 10.0 * threshold);
    int hits = 0;
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::MatrixXd m = planted_matrix(100, 200, rank, signal, 1.0, rng);
      if (evb_rank(m).rank == rank) ++hits;
    }
    CHECK(hits >= 9);
  }
}

TEST_CASE("a singular value exactly at the threshold is excluded") {
  const double sigma2 = 2.0;
  const double threshold = evb_threshold_oracle(4, 8, sigma2);
  const std::vector<double> gammas = {2.0 * threshold, threshold, 0.5 * threshold,
                                      0.25 * threshold};
  const RankEstimate est = evb_rank_from_spectrum(gammas, 4, 8, sigma2);
  CHECK(est.threshold == doctest::Approx(threshold).epsilon(1e-15));
  CHECK(est.rank == 1);  // strictly greater only
  REQUIRE(est.shrunk_values.size() == 1);
  CHECK(est.shrunk_values[0] > 0.0);
  CHECK(est.shrunk_values[0] < gammas[0]);
}

TEST_CASE("rank is scale invariant") {
  std::mt19937_64 rng(131);
  for (int trial = 0; trial < 8; ++trial) {
    const int rows = 6 + trial * 3;
    const int cols = 9 + trial * 2;
    Eigen::MatrixXd m = gaussian_matrix(rows, cols, rng);
    if (trial % 2 == 0) {
      const std::vector<double> signal(2, 8.0 * evb_threshold_oracle(rows, cols, 1.0));
      m = planted_matrix(rows, cols, 2, signal, 1.0, rng);
    }
    const int base = evb_rank(m).rank;
    for (const double c : {1e-3, 1e3}) {
      CHECK(evb_rank((c * m).eval()).rank == base);
    }
  }
}

TEST_CASE("rank is transpose invariant") {
  std::mt19937_64 rng(137);
  for (int trial = 0; trial < 8; ++trial) {
    const Eigen::MatrixXd m = gaussian_matrix(7 + trial, 12, rng);
    CHECK(evb_rank(m).rank == evb_rank(m.transpose().eval()).rank);
  }
}

TEST_CASE("rank is non-increasing in known sigma2") {
  std::mt19937_64 rng(139);
  const std::vector<double> signal = {40.0, 30.0, 20.0, 10.0};
  const Eigen::MatrixXd m = planted_matrix(30, 50, 4, signal, 0.5, rng);
  const auto sv = singular_values(m);
  int prev = std::numeric_limits<int>::max();
  for (double s2 = 0.01; s2 < 100.0; s2 *= 1.5) {
    const int r = evb_rank_from_spectrum(sv, 30, 50, s2).rank;
    CHECK(r <= prev);
    prev = r;
  }
}

TEST_CASE("rank never exceeds min(L, M)") {
  std::mt19937_64 rng(149);
  for (int trial = 0; trial < 10; ++trial) {
    const int rows = 2 + trial;
    const Eigen::MatrixXd m = gaussian_matrix(rows, rows + 3, rng);
    const RankEstimate est = evb_rank(m, 1e-12);
    CHECK(est.rank <= rows);
  }
}

TEST_CASE("rank estimate invariants hold") {
  std::mt19937_64 rng(151);
  const Eigen::MatrixXd m = planted_matrix(20, 40, 3, {50.0, 40.0, 30.0}, 1.0, rng);
  const RankEstimate est = evb_rank(m);
  for (int h = 0; h < est.rank; ++h) CHECK(est.singular_values[h] > est.threshold);
  for (std::size_t h = est.rank; h < est.singular_values.size(); ++h) {
    CHECK(est.singular_values[h] <= est.threshold);
  }
  CHECK(est.sigma2 >= 0.0);
  for (std::size_t h = 1; h < est.singular_values.size(); ++h) {
    CHECK(est.singular_values[h] <= est.singular_values[h - 1]);
  }
}

TEST_CASE("layer_rank recovers the construction rank of a noisy CP kernel") {
  std::mt19937_64 rng(157);
  CPFactors f = random_factors(9, 16, 32, 4, rng);
  f.weights *= 10.0;
  Tensor3 x = tensor_from_cp(f);
  const double scale = 0.01 * x.frobenius_norm() / std::sqrt(double(x.size()));
  std::normal_distribution<double> noise(0.0, scale);
  for (double& v : x.data) v += noise(rng);

  ConvLayerSpec spec;
  spec.id = "synthetic";
  spec.kernel = 3;
  spec.in_channels = 16;
  spec.out_channels = 32;
  spec.in_h = spec.in_w = 8;
  spec.pad = 1;
  spec.out_h = spec.out_w = 8;
  const LayerRankReport report = layer_rank(reshape_3way_to_kernel(x, 3, 3), spec, false);
  CHECK(report.chosen_rank == 4);
  CHECK(report.estimates.size() == 3);
  CHECK_FALSE(report.clamped);
}

TEST_CASE("layer_rank on an all-zero kernel clamps to one") {
  Kernel4 k(3, 3, 4, 4);
  ConvLayerSpec spec;
  spec.id = "zero";
  spec.kernel = 3;
  spec.in_channels = 4;
  spec.out_channels = 4;
  spec.in_h = spec.in_w = 5;
  spec.pad = 1;
  spec.out_h = spec.out_w = 5;
  const LayerRankReport report = layer_rank(k, spec, false);
  CHECK(report.chosen_rank == 1);
  CHECK(report.clamped);
}

TEST_CASE("layer_rank two_way estimates one matrix per group") {
  std::mt19937_64 rng(163);
  ConvLayerSpec spec;
  spec.id = "first";
  spec.kernel = 5;
  spec.in_channels = 3;
  spec.out_channels = 16;
  spec.stride = 2;
  spec.in_h = spec.in_w = 31;
  spec.out_h = spec.out_w = 14;
  const Kernel4 k = random_kernel(5, 5, 3, 16, rng);
  const LayerRankReport report = layer_rank(k, spec, true);
  CHECK(report.two_way);
  REQUIRE(report.estimates.size() == 1);
  CHECK(report.estimates[0].mode == 0);
  // 2-way treatment must match the mode-1 unfolding estimate exactly.
  const Matricization m1 = matricize(reshape_kernel_to_3way(k), 1);
  CHECK(report.estimates[0].estimate.rank == evb_rank(m1.m).rank);
}

}  // TEST_SUITE("vbmf")
