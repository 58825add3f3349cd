// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable operations on Tensor<T>. Every op records its own backward
// rule. Binary elementwise ops broadcast only in two ways: a one-element
// operand against anything, or an operand whose shape is a trailing suffix of
// the other's shape (e.g. a bias row added to every row of a matrix).

#pragma once

#include <cstddef>
#include <vector>

#include "depthadapt/tensor.hpp"

namespace depthadapt {

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T offset);

template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);

/// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
template <typename T> Tensor<T> gelu(const Tensor<T>& a);

/// Throws a domain error on any non-positive element.
template <typename T> Tensor<T> log(const Tensor<T>& a);
template <typename T> Tensor<T> square(const Tensor<T>& a);
/// Throws a domain error on zero elements.
template <typename T> Tensor<T> reciprocal(const Tensor<T>& a);

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);

template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> transpose(const Tensor<T>& a);
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);

/// out[i] = a[indices[i]] with out of the given shape. Covers permutations
/// and layout changes; backward scatters gradients back.
template <typename T>
Tensor<T> gather(const Tensor<T>& a, Shape shape, std::vector<std::size_t> indices);

/// x[N x in] * w[out x in]^T (+ bias[out]).
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias = nullptr);

/// Cross-correlation with zero padding. input B x C x H x W, kernel O x C x kh x kw.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, std::size_t stride, std::size_t pad);

/// softmax(q k^T / sqrt(d)) v per head. q: (groups*L) x d, k: (groups*S) x d,
/// v: (groups*S) x dv. Rows are split into `groups` independent sequences and
/// feature columns into `heads` equal slices; d is the per-head width.
template <typename T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads = 1,
                               std::size_t groups = 1);

/// Softmax weights of the same attention, for inspection (not differentiable).
template <typename T>
std::vector<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k, std::size_t heads = 1,
                                 std::size_t groups = 1);

}  // namespace depthadapt
