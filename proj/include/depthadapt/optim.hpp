// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "depthadapt/tensor.hpp"

namespace depthadapt {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed list of leaf tensors. Parameters with no
/// entry in the gradient map are left untouched for that step.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, AdamOptions options);

  void step(const GradientMap<T>& grads);

  std::size_t steps_taken() const { return t_; }
  /// Two moment buffers per parameter element.
  std::size_t state_floats() const;

 private:
  std::vector<Tensor<T>> params_;
  AdamOptions opt_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace depthadapt
