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
#include <benchmark/benchmark.h>

#include <random>

#include "cprank/cpd.hpp"
#include "cprank/tensor.hpp"
#include "cprank/vbmf.hpp"

namespace {

using namespace cprank;

Tensor3 random_tensor(int spatial, int inputs, int outputs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor3 t(spatial, inputs, outputs);
  for (double& v : t.data) v = dist(rng);
  return t;
}

void BM_SingularValues(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Tensor3 t = random_tensor(9, n, 2 * n, 1);
  const Matricization m = matricize(t, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(singular_values(m.m));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SingularValues)->RangeMultiplier(2)->Range(16, 256)->Complexity();

void BM_EstimateNoise(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Tensor3 t = random_tensor(9, n, 2 * n, 2);
  const std::vector<double> sv = singular_values(matricize(t, 1).m);
  const int rows = static_cast<int>(matricize(t, 1).m.rows());
  const int cols = static_cast<int>(matricize(t, 1).m.cols());
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_noise_evb(sv, rows, cols));
  }
}
BENCHMARK(BM_EstimateNoise)->RangeMultiplier(2)->Range(16, 256);

void BM_LayerRank(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> dist(0.0, 0.05);
  ConvLayerSpec spec;
  spec.id = "bench";
  spec.kernel = 3;
  spec.in_channels = 64;
  spec.out_channels = 96;
  spec.pad = 1;
  spec.in_h = spec.in_w = 14;
  spec.out_h = spec.out_w = 14;
  Kernel4 k(3, 3, 64, 96);
  for (double& v : k.data) v = dist(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(layer_rank(k, spec, false));
  }
}
BENCHMARK(BM_LayerRank);

void BM_CpAlsSweeps(benchmark::State& state) {
  const Tensor3 t = random_tensor(9, 48, 64, 4);
  CpOptions opts;
  opts.max_sweeps = static_cast<int>(state.range(0));
  opts.tol = 0.0;
  opts.restarts = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cp_als(t, 16, opts));
  }
}
BENCHMARK(BM_CpAlsSweeps)->Arg(5)->Arg(20);

void BM_ConvForward(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist(0.0, 1.0);
  ConvLayerSpec spec;
  spec.id = "bench";
  spec.kernel = 3;
  spec.in_channels = 32;
  spec.out_channels = 32;
  spec.pad = 1;
  spec.in_h = spec.in_w = 28;
  spec.out_h = spec.out_w = 28;
  Kernel4 k(3, 3, 32, 32);
  for (double& v : k.data) v = dist(rng);
  Activation in(32, 28, 28);
  for (double& v : in.data) v = dist(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv_forward(in, spec, k));
  }
}
BENCHMARK(BM_ConvForward);

}  // namespace

BENCHMARK_MAIN();
