// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthadapt/optim.hpp"

#include <cmath>

#include "depthadapt/errors.hpp"

namespace depthadapt {

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, AdamOptions options) : params_(std::move(params)), opt_(options) {
  if (!(opt_.lr > 0.0)) fail(ErrorCategory::Configuration, "optimizer learning rate must be positive");
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

template <typename T>
void Adam<T>::step(const GradientMap<T>& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto* g = grads.find(params_[i]);
    if (!g) continue;
    const auto gv = g->data();
    auto w = params_[i].mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = static_cast<double>(gv[k]);
      m[k] = opt_.beta1 * m[k] + (1.0 - opt_.beta1) * gk;
      v[k] = opt_.beta2 * v[k] + (1.0 - opt_.beta2) * gk * gk;
      w[k] = static_cast<T>(static_cast<double>(w[k]) - opt_.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + opt_.eps));
    }
  }
}

template <typename T>
std::size_t Adam<T>::state_floats() const {
  std::size_t n = 0;
  for (const auto& m : m_) n += 2 * m.size();
  return n;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace depthadapt
