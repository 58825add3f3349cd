// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// OpenMP kernels against their serial references.

#include <cmath>
#include <random>
#include <vector>

#include "depthadapt/kernels.hpp"
#include "doctest.h"

namespace k = depthadapt::kernels;

namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(u(rng));
  return v;
}

template <typename T>
double max_rel_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double worst = 0.0, scale = 1e-30;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    scale = std::max(scale, std::fabs(static_cast<double>(b[i])));
  }
  return worst / scale;
}

k::ConvDims conv_dims(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> small(1, 3);
  const std::size_t geo[][3] = {{3, 1, 1}, {4, 2, 1}, {2, 2, 0}, {1, 1, 0}, {3, 2, 1}};
  const auto& g = geo[std::uniform_int_distribution<int>(0, 4)(rng)];
  k::ConvDims d;
  d.batch = small(rng);
  d.in_channels = small(rng);
  d.out_channels = small(rng) + 1;
  d.kernel_h = d.kernel_w = g[0];
  d.stride = g[1];
  d.pad = g[2];
  // odd sizes only where stride 2 still divides evenly
  d.height = d.width = g[1] == 2 ? (g[0] == 3 ? 9 : 8) : 7;
  d.out_h = (d.height + 2 * d.pad - d.kernel_h) / d.stride + 1;
  d.out_w = (d.width + 2 * d.pad - d.kernel_w) / d.stride + 1;
  return d;
}

}  // namespace

TEST_CASE_TEMPLATE("parallel matmul equals the reference bit for bit", T, float, double) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> d(1, 40);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = d(rng), kk = d(rng), n = d(rng);
    const auto a = random_vec<T>(m * kk, rng), b = random_vec<T>(kk * n, rng);
    std::vector<T> c1(m * n), c2(m * n);
    k::matmul(a.data(), b.data(), c1.data(), m, kk, n);
    k::reference::matmul(a.data(), b.data(), c2.data(), m, kk, n);
    REQUIRE(c1 == c2);
  }
}

TEST_CASE_TEMPLATE("parallel conv forward equals the reference bit for bit", T, float, double) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = conv_dims(rng);
    const auto in = random_vec<T>(d.batch * d.in_channels * d.height * d.width, rng);
    const auto w = random_vec<T>(d.out_channels * d.patch_size(), rng);
    std::vector<T> o1(d.batch * d.out_channels * d.out_plane()), o2(o1.size());
    k::conv2d_forward(in.data(), w.data(), o1.data(), d);
    k::reference::conv2d_forward(in.data(), w.data(), o2.data(), d);
    REQUIRE(o1 == o2);
  }
}

TEST_CASE_TEMPLATE("parallel conv backward agrees with the reference", T, float, double) {
  std::mt19937_64 rng(3);
  const double tol = sizeof(T) == 4 ? 1e-5 : 1e-12;
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = conv_dims(rng);
    const auto in = random_vec<T>(d.batch * d.in_channels * d.height * d.width, rng);
    const auto w = random_vec<T>(d.out_channels * d.patch_size(), rng);
    const auto g = random_vec<T>(d.batch * d.out_channels * d.out_plane(), rng);
    std::vector<T> gi1(in.size()), gi2(in.size()), gw1(w.size()), gw2(w.size());
    k::conv2d_backward_input(g.data(), w.data(), gi1.data(), d);
    k::reference::conv2d_backward_input(g.data(), w.data(), gi2.data(), d);
    k::conv2d_backward_kernel(g.data(), in.data(), gw1.data(), d);
    k::reference::conv2d_backward_kernel(g.data(), in.data(), gw2.data(), d);
    CHECK(max_rel_diff(gi1, gi2) <= tol);
    CHECK(max_rel_diff(gw1, gw2) <= tol);
  }
}

TEST_CASE_TEMPLATE("parallel attention agrees with the reference", T, float, double) {
  std::mt19937_64 rng(4);
  const double tol = sizeof(T) == 4 ? 1e-5 : 1e-12;
  std::uniform_int_distribution<std::size_t> small(1, 4);
  for (int trial = 0; trial < 30; ++trial) {
    k::AttentionDims d;
    d.groups = small(rng);
    d.heads = small(rng);
    d.q_len = small(rng) + 2;
    d.kv_len = small(rng) + 3;
    d.dim = d.heads * small(rng);
    d.value_dim = d.heads * small(rng);
    const auto q = random_vec<T>(d.groups * d.q_len * d.dim, rng);
    const auto kk = random_vec<T>(d.groups * d.kv_len * d.dim, rng);
    const auto v = random_vec<T>(d.groups * d.kv_len * d.value_dim, rng);
    const auto go = random_vec<T>(d.groups * d.q_len * d.value_dim, rng);
    const std::size_t np = d.groups * d.heads * d.q_len * d.kv_len;
    std::vector<T> o1(go.size()), o2(go.size()), p1(np), p2(np);
    k::attention_forward(q.data(), kk.data(), v.data(), o1.data(), p1.data(), d);
    k::reference::attention_forward(q.data(), kk.data(), v.data(), o2.data(), p2.data(), d);
    CHECK(max_rel_diff(o1, o2) <= tol);
    CHECK(max_rel_diff(p1, p2) <= tol);
    std::vector<T> gq1(q.size()), gq2(q.size()), gk1(kk.size()), gk2(kk.size()), gv1(v.size()), gv2(v.size());
    k::attention_backward(q.data(), kk.data(), v.data(), p1.data(), go.data(), gq1.data(), gk1.data(), gv1.data(), d);
    k::reference::attention_backward(q.data(), kk.data(), v.data(), p2.data(), go.data(), gq2.data(), gk2.data(),
                                     gv2.data(), d);
    CHECK(max_rel_diff(gq1, gq2) <= tol);
    CHECK(max_rel_diff(gk1, gk2) <= tol);
    CHECK(max_rel_diff(gv1, gv2) <= tol);
  }
}
