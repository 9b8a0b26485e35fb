// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference kernels vs the OpenMP kernels on the convolution shapes
// that dominate recorder and backbone training.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "krnet/kernels/parallel.hpp"
#include "krnet/kernels/reference.hpp"

namespace {

using krnet::kernels::ConvGeometry;
using krnet::kernels::Transpose;

struct ConvCase {
  ConvGeometry g;
  std::vector<float> input, weight, bias, output;
};

ConvCase make_case(std::size_t batch, std::size_t cin, std::size_t cout, std::size_t hw, std::size_t kernel,
                   std::size_t stride) {
  ConvCase c;
  c.g.batch = batch;
  c.g.in_channels = cin;
  c.g.out_channels = cout;
  c.g.in_h = c.g.in_w = hw;
  c.g.kernel = kernel;
  c.g.stride = stride;
  c.g.pad = kernel / 2;
  c.g.out_h = c.g.out_w = krnet::kernels::conv_out_extent(hw, kernel, stride, c.g.pad);
  std::mt19937 rng(7);
  std::uniform_real_distribution<float> dist(-1.f, 1.f);
  auto fill = [&](std::vector<float>& v, std::size_t n) {
    v.resize(n);
    for (auto& x : v) x = dist(rng);
  };
  fill(c.input, batch * cin * hw * hw);
  fill(c.weight, c.g.weight_size());
  fill(c.bias, cout);
  c.output.resize(batch * cout * c.g.out_plane());
  return c;
}

template <bool kParallel>
void BM_ConvForward(benchmark::State& state) {
  auto c = make_case(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)),
                     static_cast<std::size_t>(state.range(1)), static_cast<std::size_t>(state.range(2)), 3, 1);
  for (auto _ : state) {
    if constexpr (kParallel) {
      krnet::kernels::parallel::conv2d_forward(c.g, c.input.data(), c.weight.data(), c.bias.data(), c.output.data());
    } else {
      krnet::kernels::reference::conv2d_forward(c.g, c.input.data(), c.weight.data(), c.bias.data(), c.output.data());
    }
    benchmark::DoNotOptimize(c.output.data());
  }
  const double flops = 2.0 * static_cast<double>(c.g.batch * c.g.out_plane() * c.g.weight_size());
  state.counters["GFLOPS"] = benchmark::Counter(flops, benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}

template <bool kParallel>
void BM_ConvBackwardWeight(benchmark::State& state) {
  auto c = make_case(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)),
                     static_cast<std::size_t>(state.range(1)), static_cast<std::size_t>(state.range(2)), 3, 1);
  std::vector<float> grad_w(c.weight.size());
  std::vector<float> grad_b(c.bias.size());
  for (auto _ : state) {
    if constexpr (kParallel) {
      krnet::kernels::parallel::conv2d_backward_weight(c.g, c.output.data(), c.input.data(), grad_w.data(),
                                                       grad_b.data());
    } else {
      krnet::kernels::reference::conv2d_backward_weight(c.g, c.output.data(), c.input.data(), grad_w.data(),
                                                        grad_b.data());
    }
    benchmark::DoNotOptimize(grad_w.data());
  }
}

template <bool kParallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<float> a(n * n, 0.5f), b(n * n, 0.25f), c(n * n);
  for (auto _ : state) {
    if constexpr (kParallel) {
      krnet::kernels::parallel::gemm(Transpose::kNo, Transpose::kNo, n, n, n, 1.f, a.data(), b.data(), 0.f, c.data());
    } else {
      krnet::kernels::reference::gemm(Transpose::kNo, Transpose::kNo, n, n, n, 1.f, a.data(), b.data(), 0.f,
                                      c.data());
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * static_cast<double>(n * n * n),
                                                benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}

// {batch, channels, spatial}
BENCHMARK(BM_ConvForward<false>)->Args({64, 32, 4})->Args({32, 16, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForward<true>)->Args({64, 32, 4})->Args({32, 16, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardWeight<false>)->Args({64, 32, 4})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardWeight<true>)->Args({64, 32, 4})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gemm<false>)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gemm<true>)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
