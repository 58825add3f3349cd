// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Full-parameter composition on top of merged stage-1 weights:
//
//   W2 = alpha * W1 + beta * D,   D = scale * P * (m_hat / (sqrt(v_hat) + eps))
//
// where m and v are moment estimates of the projected negative gradient
// P^T(-dL/dW1) and P holds the top left singular vectors of the most recent
// gradient, refreshed every T steps. Optimizer state per layer is therefore
// m*r_hat + 2*r_hat*n floats plus the two scalars, instead of 2*m*n for Adam.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "depthadapt/model.hpp"
#include "depthadapt/subspace.hpp"
#include "json.hpp"

namespace depthadapt {

struct Stage2Options {
  std::size_t rank = 4;             // r_hat
  std::size_t refresh_period = 50;  // T
  double lr = 1e-4;                 // SGD rate for alpha and beta
  double correction_scale = 1e-4;   // multiplies the reconstructed direction
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct Stage2State {
  std::string layer_id;
  Tensor<T> alpha;       // scalar, learnable, starts at 1
  Tensor<T> beta;        // scalar, learnable, starts at 0
  Tensor<T> projector;   // m x r_hat, orthonormal columns
  Tensor<T> accumulator; // r_hat x n, first moment of the projected direction
  Tensor<T> second_moment;  // r_hat x n
  std::size_t refresh_period = 50;
  std::size_t step_counter = 0;
};

/// -dL/dW for the given base weight. Missing entry is a state error.
template <typename T>
Tensor<T> full_param_direction(const Tensor<T>& base_weight, const GradientMap<T>& grads);

/// alpha * w_stage1 + beta * direction, elementwise.
template <typename T>
Tensor<T> compose(const Tensor<T>& w_stage1, const Tensor<T>& direction, T alpha, T beta);

/// Differentiable form with scalar tensors for alpha and beta.
template <typename T>
Tensor<T> compose(const Tensor<T>& w_stage1, const Tensor<T>& direction, const Tensor<T>& alpha,
                  const Tensor<T>& beta);

/// P^T * grad.
template <typename T>
Tensor<T> project_gradient(const Tensor<T>& grad, const Tensor<T>& projector);

/// P * projected.
template <typename T>
Tensor<T> reconstruct(const Tensor<T>& projector, const Tensor<T>& projected);

/// Top-r_hat left singular vectors of grad, each column signed so its
/// largest-magnitude entry is positive. An all-zero grad returns `previous`
/// when given, else the first r_hat standard basis vectors.
template <typename T>
Tensor<T> refresh_projector(const Tensor<T>& grad, std::size_t rank, const Tensor<T>* previous = nullptr);

template <typename T>
class Stage2Set : public WeightResolver<T> {
 public:
  Stage2Set() = default;

  /// alpha = 1, beta = 0, zero moments, identity projector columns. Marks each
  /// selected base weight as requiring gradients (it is never stepped).
  static Stage2Set init(const SubspaceRegistry<T>& selection, const Stage2Options& options);

  Tensor<T> resolve(const WeightSlot<T>& slot) const override;

  /// Current correction D for a layer (zero before the first update).
  Tensor<T> correction(const Stage2State<T>& state) const;

  /// Consumes the gradients of one forward/backward pass: refreshes
  /// projectors on schedule, updates the projected moments and takes an SGD
  /// step on alpha and beta.
  void update(const GradientMap<T>& grads);

  /// Writes W2 into each slot and resets alpha = 1, beta = 0, moments = 0.
  void materialize(ToyDepthModel<T>& model);

  const SubspaceRegistry<T>& registry() const { return registry_; }
  const Stage2Options& options() const { return options_; }
  std::map<std::string, Stage2State<T>>& states() { return states_; }
  const std::map<std::string, Stage2State<T>>& states() const { return states_; }

 private:
  SubspaceRegistry<T> registry_;
  Stage2Options options_;
  std::map<std::string, Stage2State<T>> states_;
};

/// One stage-2 training step on a batch; returns the loss before the update.
/// Throws a schedule error if `stage1_merged` is false.
template <typename T>
T stage2_step(const ToyDepthModel<T>& model, const Tensor<T>& rgb, const Tensor<T>& gt_depth, Stage2Set<T>& set,
              bool stage1_merged = true);

enum class OptimizerMode { FullAdam, Projected };

struct MemoryFootprint {
  std::vector<std::pair<std::string, std::uint64_t>> floats_per_layer;
  std::uint64_t total_floats = 0;
};

/// full-adam: 2*m*n per layer. projected: m*r_hat + 2*r_hat*n + 2.
template <typename T>
MemoryFootprint memory_footprint(const SubspaceRegistry<T>& registry, OptimizerMode mode, std::size_t rank);

nlohmann::json to_json(const MemoryFootprint& footprint);

}  // namespace depthadapt
