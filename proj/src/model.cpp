// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthadapt/model.hpp"

#include <cmath>
#include <random>

#include "depthadapt/errors.hpp"
#include "depthadapt/ops.hpp"

namespace depthadapt {

void ModelConfig::validate() const {
  if (height == 0 || width == 0 || height % kPatch != 0 || width % kPatch != 0) {
    fail(ErrorCategory::Configuration, "model.height/model.width must be positive multiples of " +
                                           std::to_string(kPatch) + ", got " + std::to_string(height) + "x" +
                                           std::to_string(width));
  }
  if (base_channels == 0) fail(ErrorCategory::Configuration, "model.base_channels must be positive");
  if (attention_heads == 0 || base_channels % attention_heads != 0) {
    fail(ErrorCategory::Configuration, "model.attention_heads must divide model.base_channels");
  }
  if (mlp_hidden == 0) fail(ErrorCategory::Configuration, "model.mlp_hidden must be positive");
  if (mlp_layers < 2) fail(ErrorCategory::Configuration, "model.mlp_layers must be at least 2");
  if (!(min_depth > 0.0) || !(min_depth < max_depth) || !std::isfinite(max_depth)) {
    fail(ErrorCategory::Configuration, "model.min_depth must satisfy 0 < min_depth < max_depth");
  }
}

namespace {

template <typename T>
Tensor<T> random_normal(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<T> values(shape_numel(shape));
  for (auto& v : values) v = static_cast<T>(dist(rng));
  return Tensor<T>::from(std::move(shape), std::move(values));
}

}  // namespace

template <typename T>
ToyDepthModel<T>::ToyDepthModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  const std::size_t c = cfg_.base_channels;
  const std::size_t k = 4;
  const std::size_t patch_out = ModelConfig::kPatch * ModelConfig::kPatch;

  auto add_slot = [&](std::string id, std::string family, std::size_t rows, std::size_t cols, Shape native,
                      double stddev) {
    WeightSlot<T> s;
    s.layer_id = std::move(id);
    s.family = std::move(family);
    s.rows = rows;
    s.cols = cols;
    s.native_shape = std::move(native);
    s.weight = random_normal<T>(Shape{rows, cols}, stddev, rng);
    slots_.push_back(std::move(s));
  };
  auto he = [](std::size_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); };

  add_slot("conv1", "conv", c, 3 * k * k, Shape{c, 3, k, k}, he(3 * k * k));
  add_slot("conv2", "conv", c, c * k * k, Shape{c, c, k, k}, he(c * k * k));
  add_slot("attn.qkv", "attention", 3 * c, c, Shape{3 * c, c}, 1.0 / std::sqrt(double(c)));
  add_slot("attn.out", "attention", c, c, Shape{c, c}, 0.5 / std::sqrt(double(c)));
  std::size_t in = c;
  for (std::size_t l = 0; l < cfg_.mlp_layers; ++l) {
    const bool last = l + 1 == cfg_.mlp_layers;
    const std::size_t out = last ? patch_out : cfg_.mlp_hidden;
    add_slot("mlp.fc" + std::to_string(l + 1), "mlp", out, in, Shape{out, in},
             last ? 1.0 / std::sqrt(double(in)) : he(in));
    in = out;
  }

  biases_.emplace_back("attn.qkv.bias", Tensor<T>::zeros(Shape{3 * c}));
  biases_.emplace_back("attn.out.bias", Tensor<T>::zeros(Shape{c}));
  for (std::size_t l = 0; l + 1 < cfg_.mlp_layers; ++l) {
    const auto& s = slots_[4 + l];
    biases_.emplace_back(s.layer_id + ".bias", Tensor<T>::zeros(Shape{s.rows}));
  }
  // Output bias centres the untrained prediction on the geometric middle of
  // the depth range instead of near min_depth.
  const double mid = std::sqrt(cfg_.min_depth * cfg_.max_depth);
  const double s_mid = (1.0 / mid - 1.0 / cfg_.max_depth) / (1.0 / cfg_.min_depth - 1.0 / cfg_.max_depth);
  biases_.emplace_back(slots_.back().layer_id + ".bias",
                       Tensor<T>::full(Shape{patch_out}, static_cast<T>(std::log(s_mid / (1.0 - s_mid)))));
}

template <typename T>
WeightSlot<T>& ToyDepthModel<T>::slot(std::string_view layer_id) {
  for (auto& s : slots_)
    if (s.layer_id == layer_id) return s;
  fail(ErrorCategory::State, "no layer named '" + std::string(layer_id) + "'");
}

template <typename T>
const WeightSlot<T>& ToyDepthModel<T>::slot(std::string_view layer_id) const {
  return const_cast<ToyDepthModel*>(this)->slot(layer_id);
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> ToyDepthModel<T>::named_tensors() const {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  for (const auto& s : slots_) out.emplace_back(s.layer_id + ".weight", s.weight);
  for (const auto& b : biases_) out.push_back(b);
  return out;
}

template <typename T>
Tensor<T> ToyDepthModel<T>::weight(std::size_t index, const WeightResolver<T>* resolver) const {
  const auto& s = slots_[index];
  Tensor<T> w = resolver ? resolver->resolve(s) : s.weight;
  if (s.native_shape.size() != 2) w = reshape(w, s.native_shape);
  return w;
}

template <typename T>
Tensor<T> ToyDepthModel<T>::forward_raw(const Tensor<T>& rgb, const WeightResolver<T>* resolver) const {
  if (rgb.rank() != 4 || rgb.dim(1) != 3 || rgb.dim(2) != cfg_.height || rgb.dim(3) != cfg_.width) {
    fail(ErrorCategory::Dimension, "model expects B x 3 x " + std::to_string(cfg_.height) + " x " +
                                       std::to_string(cfg_.width) + " input, got " + shape_str(rgb.shape()));
  }
  const std::size_t batch = rgb.dim(0);
  const std::size_t c = cfg_.base_channels;
  const std::size_t th = cfg_.height / ModelConfig::kPatch;
  const std::size_t tw = cfg_.width / ModelConfig::kPatch;
  const std::size_t n_tok = th * tw;

  auto h = gelu(conv2d(rgb, weight(0, resolver), 2, 1));
  h = gelu(conv2d(h, weight(1, resolver), 2, 1));

  // B x C x th x tw -> (B*n_tok) x C
  std::vector<std::size_t> idx(batch * n_tok * c);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < n_tok; ++t)
      for (std::size_t ch = 0; ch < c; ++ch) idx[(b * n_tok + t) * c + ch] = (b * c + ch) * n_tok + t;
  auto tokens = gather(h, Shape{batch * n_tok, c}, std::move(idx));

  const auto& qkv_bias = biases_[0].second;
  const auto& out_bias = biases_[1].second;
  auto qkv = linear(tokens, weight(2, resolver), &qkv_bias);
  auto columns = [&](std::size_t part) {
    std::vector<std::size_t> cols(batch * n_tok * c);
    for (std::size_t r = 0; r < batch * n_tok; ++r)
      for (std::size_t ch = 0; ch < c; ++ch) cols[r * c + ch] = r * 3 * c + part * c + ch;
    return gather(qkv, Shape{batch * n_tok, c}, std::move(cols));
  };
  auto attended = scaled_dot_attention(columns(0), columns(1), columns(2), cfg_.attention_heads, batch);
  tokens = add(tokens, linear(attended, weight(3, resolver), &out_bias));

  auto x = tokens;
  for (std::size_t l = 0; l < cfg_.mlp_layers; ++l) {
    x = linear(x, weight(4 + l, resolver), &biases_[2 + l].second);
    if (l + 1 < cfg_.mlp_layers) x = gelu(x);
  }

  // (B*n_tok) x (p*p) -> B x H x W
  const std::size_t p = ModelConfig::kPatch;
  std::vector<std::size_t> pix(batch * cfg_.height * cfg_.width);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t y = 0; y < cfg_.height; ++y)
      for (std::size_t xx = 0; xx < cfg_.width; ++xx) {
        const std::size_t tok = b * n_tok + (y / p) * tw + xx / p;
        pix[(b * cfg_.height + y) * cfg_.width + xx] = tok * p * p + (y % p) * p + xx % p;
      }
  return gather(x, Shape{batch, cfg_.height, cfg_.width}, std::move(pix));
}

template <typename T>
Tensor<T> ToyDepthModel<T>::forward_depth(const Tensor<T>& rgb, const WeightResolver<T>* resolver) const {
  for (auto v : rgb.data()) {
    if (!std::isfinite(static_cast<double>(v))) fail(ErrorCategory::Domain, "non-finite value in model input");
  }
  const T inv_max = static_cast<T>(1.0 / cfg_.max_depth);
  const T inv_span = static_cast<T>(1.0 / cfg_.min_depth - 1.0 / cfg_.max_depth);
  auto disparity = add_scalar(scale(sigmoid(forward_raw(rgb, resolver)), inv_span), inv_max);
  return reciprocal(disparity);
}

template <typename T>
Tensor<T> training_loss(const Tensor<T>& pred, const Tensor<T>& gt, T lambda) {
  if (pred.shape() != gt.shape()) {
    fail(ErrorCategory::Dimension,
         "training_loss: prediction " + shape_str(pred.shape()) + " vs ground truth " + shape_str(gt.shape()));
  }
  for (auto v : gt.data()) {
    if (!(v > T(0))) fail(ErrorCategory::Domain, "training_loss: non-positive ground-truth depth");
  }
  for (auto v : pred.data()) {
    if (!(v > T(0))) fail(ErrorCategory::Domain, "training_loss: non-positive predicted depth");
  }
  const std::size_t maps = pred.rank() > 1 ? pred.dim(0) : 1;
  const std::size_t per_map = pred.numel() / maps;
  auto err = sub(log(pred), log(gt));
  auto rows = reshape(err, Shape{maps, per_map});
  auto ones = Tensor<T>::full(Shape{per_map, 1}, T(1) / static_cast<T>(per_map));
  auto map_means = matmul(rows, ones);  // maps x 1
  return sub(mean(square(err)), scale(mean(square(map_means)), lambda));
}

template class ToyDepthModel<float>;
template class ToyDepthModel<double>;
template Tensor<float> training_loss(const Tensor<float>&, const Tensor<float>&, float);
template Tensor<double> training_loss(const Tensor<double>&, const Tensor<double>&, double);

}  // namespace depthadapt
