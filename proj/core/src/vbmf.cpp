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
#include "cprank/vbmf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

namespace cprank {

namespace {

constexpr double kTaubarCoeff = 2.5129;
constexpr double kZeroSpectrumCutoff = 1e-15;  // relative to gamma_1

struct EvbConstants {
  double alpha;    // L / M
  double taubar;   // 2.5129 * sqrt(alpha)
  double xbar;     // (1 + taubar) * (1 + alpha / taubar)
};

EvbConstants evb_constants(int L, int M) {
  EvbConstants c;
  c.alpha = static_cast<double>(L) / static_cast<double>(M);
  c.taubar = kTaubarCoeff * std::sqrt(c.alpha);
  c.xbar = (1.0 + c.taubar) * (1.0 + c.alpha / c.taubar);
  return c;
}

double tau_of_x(double x, double alpha) {
  const double d = x - (1.0 + alpha);
  return 0.5 * (d + std::sqrt(std::max(0.0, d * d - 4.0 * alpha)));
}

void check_spectrum(std::span<const double> gammas, int L, int M) {
  if (L < 1 || M < 1 || L > M) {
    throw validation_error("vbmf: need 1 <= L <= M");
  }
  if (gammas.size() != static_cast<std::size_t>(L)) {
    throw validation_error("vbmf: spectrum length must equal L");
  }
  double prev = std::numeric_limits<double>::infinity();
  for (double g : gammas) {
    if (!std::isfinite(g) || g < 0.0) {
      throw numeric_error("vbmf: spectrum must be finite and non-negative");
    }
    if (g > prev) {
      throw validation_error("vbmf: spectrum must be non-increasing");
    }
    prev = g;
  }
}

double objective_impl(std::span<const double> gammas, int M, double sigma2,
                      const EvbConstants& c) {
  const double cutoff = gammas.empty() ? 0.0 : gammas[0] * kZeroSpectrumCutoff;
  double psi = 0.0;
  for (double g : gammas) {
    if (g <= cutoff) continue;
    const double x = g * g / (static_cast<double>(M) * sigma2);
    if (x <= c.xbar) {
      psi += x - std::log(x);
    } else {
      const double t = tau_of_x(x, c.alpha);
      psi += x - t + std::log((t + 1.0) / x) + c.alpha * std::log(t / c.alpha + 1.0);
    }
  }
  return psi;
}

/// Golden-section minimization of f over [lo, hi], to absolute width `width`.
template <typename F>
double golden_section_min(F f, double lo, double hi, double width) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c1 = b - kInvPhi * (b - a);
  double c2 = a + kInvPhi * (b - a);
  double f1 = f(c1), f2 = f(c2);
  while (b - a > width) {
    if (f1 < f2) {
      b = c2;
      c2 = c1;
      f2 = f1;
      c1 = b - kInvPhi * (b - a);
      f1 = f(c1);
    } else {
      a = c1;
      c1 = c2;
      f1 = f2;
      c2 = a + kInvPhi * (b - a);
      f2 = f(c2);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

std::vector<double> singular_values(const Eigen::MatrixXd& m) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw validation_error("singular_values: empty matrix");
  }
  if (!m.allFinite()) {
    throw numeric_error("singular_values: non-finite entries");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  return std::vector<double>(sv.data(), sv.data() + sv.size());
}

double evb_objective(std::span<const double> gammas, int left_dim, int right_dim,
                     double sigma2) {
  const int L = std::min(left_dim, right_dim);
  const int M = std::max(left_dim, right_dim);
  check_spectrum(gammas, L, M);
  if (sigma2 <= 0.0 || !std::isfinite(sigma2)) {
    throw validation_error("evb_objective: sigma2 must be positive and finite");
  }
  return objective_impl(gammas, M, sigma2, evb_constants(L, M));
}

double estimate_noise_evb(std::span<const double> gammas, int left_dim,
                          int right_dim) {
  const int L = std::min(left_dim, right_dim);
  const int M = std::max(left_dim, right_dim);
  check_spectrum(gammas, L, M);
  const EvbConstants c = evb_constants(L, M);

  double sum2 = 0.0;
  for (double g : gammas) sum2 += g * g;
  if (sum2 <= 0.0) return 0.0;  // degenerate all-zero spectrum

  const double hi = sum2 / (static_cast<double>(L) * M);

  // K = min(ceil(L / (1 + alpha)) - 1, L - 1); L/(1+alpha) = L*M/(L+M).
  const long long lm = static_cast<long long>(L) * M;
  const long long k_ceil = (lm + (L + M) - 1) / (L + M);
  const int K = static_cast<int>(std::min<long long>(k_ceil - 1, L - 1));

  double tail2 = 0.0;
  for (int h = K; h < L; ++h) tail2 += gammas[h] * gammas[h];
  double lo = std::max(gammas[K] * gammas[K] / (M * c.xbar),
                       tail2 / (static_cast<double>(L - K) * M));
  lo = std::min(lo, hi);
  if (lo <= 0.0) lo = hi * 1e-30;  // exact low-rank tail; keep the log grid finite

  const auto psi = [&](double s2) { return objective_impl(gammas, M, s2, c); };

  if (!(lo < hi)) return hi;

  constexpr int kGridPoints = 200;
  const double log_lo = std::log(lo), log_hi = std::log(hi);
  int best = 0;
  double best_psi = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGridPoints; ++i) {
    const double u = log_lo + (log_hi - log_lo) * i / (kGridPoints - 1);
    const double v = psi(std::exp(u));
    if (v < best_psi) {
      best_psi = v;
      best = i;
    }
  }
  const double step = (log_hi - log_lo) / (kGridPoints - 1);
  const double a = log_lo + step * std::max(0, best - 1);
  const double b = log_lo + step * std::min(kGridPoints - 1, best + 1);
  const double u_min =
      golden_section_min([&](double u) { return psi(std::exp(u)); }, a, b, 1e-8);
  const double refined = std::exp(u_min);
  return psi(refined) <= best_psi ? refined
                                  : std::exp(log_lo + step * best);
}

RankEstimate evb_rank_from_spectrum(std::span<const double> gammas, int left_dim,
                                    int right_dim,
                                    std::optional<double> known_sigma2) {
  const int L = std::min(left_dim, right_dim);
  const int M = std::max(left_dim, right_dim);
  check_spectrum(gammas, L, M);
  if (known_sigma2 && (*known_sigma2 < 0.0 || !std::isfinite(*known_sigma2))) {
    throw validation_error("evb_rank: known sigma2 must be non-negative");
  }
  const EvbConstants c = evb_constants(L, M);

  RankEstimate est;
  est.singular_values.assign(gammas.begin(), gammas.end());
  est.sigma2 = known_sigma2 ? *known_sigma2 : estimate_noise_evb(gammas, left_dim, right_dim);
  est.threshold = std::sqrt(M * est.sigma2 * c.xbar);

  int rank = 0;
  for (double g : gammas) {
    if (g > est.threshold) ++rank;
  }
  est.rank = rank;
  est.shrunk_values.reserve(rank);
  for (int h = 0; h < rank; ++h) {
    const double g = gammas[h];
    const double g2 = g * g;
    const double u = 1.0 - (static_cast<double>(L) + M) * est.sigma2 / g2;
    const double disc =
        u * u - 4.0 * static_cast<double>(L) * M * est.sigma2 * est.sigma2 / (g2 * g2);
    est.shrunk_values.push_back(0.5 * g * (u + std::sqrt(std::max(0.0, disc))));
  }
  return est;
}

RankEstimate evb_rank(const Eigen::MatrixXd& m, std::optional<double> known_sigma2) {
  const std::vector<double> sv = singular_values(m);
  return evb_rank_from_spectrum(sv, static_cast<int>(m.rows()),
                                static_cast<int>(m.cols()), known_sigma2);
}

LayerRankReport layer_rank(const Kernel4& k, const ConvLayerSpec& spec,
                           bool two_way) {
  LayerRankReport report;
  report.layer_id = spec.id;
  report.two_way = two_way;

  const std::vector<Kernel4> groups = split_groups(k, spec);
  int max_rank = 0;
  for (int gi = 0; gi < static_cast<int>(groups.size()); ++gi) {
    const Tensor3 t3 = reshape_kernel_to_3way(groups[gi]);
    if (two_way) {
      // T x S*D*D, the mode-1 unfolding of the group tensor.
      const Matricization m1 = matricize(t3, 1);
      GroupModeEstimate gme{gi, 0, evb_rank(m1.m)};
      max_rank = std::max(max_rank, gme.estimate.rank);
      report.estimates.push_back(std::move(gme));
    } else {
      for (int mode = 1; mode <= 3; ++mode) {
        const Matricization mm = matricize(t3, mode);
        GroupModeEstimate gme{gi, mode, evb_rank(mm.m)};
        max_rank = std::max(max_rank, gme.estimate.rank);
        report.estimates.push_back(std::move(gme));
      }
    }
  }
  report.clamped = max_rank < 1;
  report.chosen_rank = std::max(max_rank, 1);
  return report;
}

}  // namespace cprank
