// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Parallel kernels against their serial references at toy-model shapes.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "depthadapt/kernels.hpp"

namespace k = depthadapt::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

k::ConvDims stem_conv(std::size_t batch) {
  k::ConvDims d;
  d.batch = batch;
  d.in_channels = 32;
  d.height = d.width = 32;
  d.out_channels = 32;
  d.kernel_h = d.kernel_w = 4;
  d.stride = 2;
  d.pad = 1;
  d.out_h = d.out_w = 16;
  return d;
}

k::AttentionDims token_attention(std::size_t batch) {
  k::AttentionDims d;
  d.groups = batch;
  d.heads = 2;
  d.q_len = d.kv_len = 256;
  d.dim = d.value_dim = 32;
  return d;
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::matmul(a.data(), b.data(), c.data(), n, n, n);
    } else {
      k::reference::matmul(a.data(), b.data(), c.data(), n, n, n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n * n * n));
}

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  const auto d = stem_conv(static_cast<std::size_t>(state.range(0)));
  const auto in = random_vec(d.batch * d.in_channels * d.height * d.width, 3);
  const auto w = random_vec(d.out_channels * d.patch_size(), 4);
  std::vector<float> out(d.batch * d.out_channels * d.out_plane());
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv2d_forward(in.data(), w.data(), out.data(), d);
    } else {
      k::reference::conv2d_forward(in.data(), w.data(), out.data(), d);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_ConvBackwardKernel(benchmark::State& state) {
  const auto d = stem_conv(static_cast<std::size_t>(state.range(0)));
  const auto in = random_vec(d.batch * d.in_channels * d.height * d.width, 5);
  const auto g = random_vec(d.batch * d.out_channels * d.out_plane(), 6);
  std::vector<float> gw(d.out_channels * d.patch_size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv2d_backward_kernel(g.data(), in.data(), gw.data(), d);
    } else {
      k::reference::conv2d_backward_kernel(g.data(), in.data(), gw.data(), d);
    }
    benchmark::DoNotOptimize(gw.data());
  }
}

template <bool Parallel>
void BM_AttentionForward(benchmark::State& state) {
  const auto d = token_attention(static_cast<std::size_t>(state.range(0)));
  const auto q = random_vec(d.groups * d.q_len * d.dim, 7);
  const auto kk = random_vec(d.groups * d.kv_len * d.dim, 8);
  const auto v = random_vec(d.groups * d.kv_len * d.value_dim, 9);
  std::vector<float> out(d.groups * d.q_len * d.value_dim), probs(d.groups * d.heads * d.q_len * d.kv_len);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::attention_forward(q.data(), kk.data(), v.data(), out.data(), probs.data(), d);
    } else {
      k::reference::attention_forward(q.data(), kk.data(), v.data(), out.data(), probs.data(), d);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_Matmul<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_Matmul<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_ConvForward<true>)->Arg(1)->Arg(8);
BENCHMARK(BM_ConvForward<false>)->Arg(1)->Arg(8);
BENCHMARK(BM_ConvBackwardKernel<true>)->Arg(8);
BENCHMARK(BM_ConvBackwardKernel<false>)->Arg(8);
BENCHMARK(BM_AttentionForward<true>)->Arg(1)->Arg(8);
BENCHMARK(BM_AttentionForward<false>)->Arg(1)->Arg(8);

BENCHMARK_MAIN();
