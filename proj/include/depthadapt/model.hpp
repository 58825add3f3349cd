// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small depth network with one weight family per adaptation subspace:
//
//   rgb B x 3 x H x W
//     -> conv 4x4/2 -> gelu -> conv 4x4/2 -> gelu        (conv1, conv2)
//     -> tokens (B*H/4*W/4) x C
//     -> tokens + out(attention(qkv(tokens)))             (attn.qkv, attn.out)
//     -> per-token MLP head -> 4x4 patch of raw outputs   (mlp.fc1 .. mlp.fcN)
//     -> depth = 1 / (a * sigmoid(x) + b)
//
// a and b are fixed so that depth spans exactly [min_depth, max_depth].

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "depthadapt/tensor.hpp"

namespace depthadapt {

struct ModelConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t base_channels = 32;
  std::size_t attention_heads = 2;
  std::size_t mlp_hidden = 64;
  std::size_t mlp_layers = 2;
  double min_depth = 0.1;
  double max_depth = 15.0;
  std::uint64_t seed = 7;

  static constexpr std::size_t kPatch = 4;  // total stride of the conv stem

  void validate() const;
};

/// An adaptable weight matrix. The tensor is stored in its 2-D adaptation
/// view rows x cols; conv kernels are O x (C*kh*kw) and reshaped on use.
template <typename T>
struct WeightSlot {
  std::string layer_id;
  std::string family;  // "conv", "mlp" or "attention"
  std::size_t rows = 0;
  std::size_t cols = 0;
  Shape native_shape;
  Tensor<T> weight;
};

/// Supplies the weight the forward pass uses for a slot (e.g. W + BA).
template <typename T>
class WeightResolver {
 public:
  virtual ~WeightResolver() = default;
  virtual Tensor<T> resolve(const WeightSlot<T>& slot) const = 0;
};

template <typename T>
class ToyDepthModel {
 public:
  explicit ToyDepthModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  std::vector<WeightSlot<T>>& adaptable_weights() { return slots_; }
  const std::vector<WeightSlot<T>>& adaptable_weights() const { return slots_; }
  WeightSlot<T>& slot(std::string_view layer_id);
  const WeightSlot<T>& slot(std::string_view layer_id) const;

  /// Every tensor of the model (adaptable weights, then biases), in a fixed order.
  std::vector<std::pair<std::string, Tensor<T>>> named_tensors() const;

  /// Raw per-pixel network output x, shape B x H x W.
  Tensor<T> forward_raw(const Tensor<T>& rgb, const WeightResolver<T>* resolver = nullptr) const;

  /// Depth in [min_depth, max_depth], shape B x H x W. Rejects non-finite input.
  Tensor<T> forward_depth(const Tensor<T>& rgb, const WeightResolver<T>* resolver = nullptr) const;

 private:
  Tensor<T> weight(std::size_t index, const WeightResolver<T>* resolver) const;

  ModelConfig cfg_;
  std::vector<WeightSlot<T>> slots_;
  std::vector<std::pair<std::string, Tensor<T>>> biases_;
};

template <typename T>
ToyDepthModel<T> build_model(const ModelConfig& cfg) {
  return ToyDepthModel<T>(cfg);
}

/// Scale-invariant log loss mean(e^2) - lambda * mean(e)^2 with e = ln pred - ln gt,
/// computed per map (leading axis) and averaged over maps.
template <typename T>
Tensor<T> training_loss(const Tensor<T>& pred, const Tensor<T>& gt, T lambda = T(0.5));

extern template class ToyDepthModel<float>;
extern template class ToyDepthModel<double>;

}  // namespace depthadapt
