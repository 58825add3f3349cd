// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite differences against reverse-mode gradients, double precision.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "depthadapt/tensor.hpp"

namespace testsupport {

using depthadapt::GradientMap;
using depthadapt::Shape;
using depthadapt::Tensor;

inline Tensor<double> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                                    bool requires_grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(depthadapt::shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor<double>::from(shape, std::move(v), requires_grad);
}

/// Values bounded away from zero in magnitude, for ops with a kink or pole at 0.
inline Tensor<double> random_away_from_zero(const Shape& shape, std::mt19937_64& rng, double gap = 0.1) {
  auto t = random_tensor(shape, rng, gap, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& x : t.mutable_data())
    if (sign(rng)) x = -x;
  return t;
}

/// ||analytic - numeric||_2 / max(||analytic||_2, ||numeric||_2) over all
/// parameters. `loss_fn` must rebuild the graph from the current leaf values.
template <typename LossFn>
double gradient_rel_error(LossFn&& loss_fn, const std::vector<Tensor<double>>& params, double h = 1e-5) {
  const auto grads = depthadapt::backward(loss_fn());
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (auto p : params) {
    const auto* g = grads.find(p);
    auto w = p.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + h;
      const double up = loss_fn().item();
      w[i] = saved - h;
      const double down = loss_fn().item();
      w[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = g ? g->at(i) : 0.0;
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
    }
  }
  const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
  return std::sqrt(diff2) / denom;
}

}  // namespace testsupport
