// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Raw compute kernels behind the differentiable ops. The functions in
// `kernels` are OpenMP-parallel; `kernels::reference` holds plain serial
// loops used by tests and the benchmark as the ground truth.
//
// matmul and conv2d_forward accumulate every output element in the same
// order as their references (row-major, left to right over the reduction
// index), so the two agree bitwise regardless of thread count.

#pragma once

#include <cstddef>

namespace depthadapt::kernels {

struct ConvDims {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t out_h = 1;
  std::size_t out_w = 1;

  std::size_t patch_size() const { return in_channels * kernel_h * kernel_w; }
  std::size_t out_plane() const { return out_h * out_w; }
};

// q: (groups*q_len) x dim, k: (groups*kv_len) x dim, v: (groups*kv_len) x value_dim.
// Feature columns are split evenly across heads.
struct AttentionDims {
  std::size_t groups = 1;
  std::size_t heads = 1;
  std::size_t q_len = 1;
  std::size_t kv_len = 1;
  std::size_t dim = 1;
  std::size_t value_dim = 1;

  std::size_t head_dim() const { return dim / heads; }
  std::size_t head_value_dim() const { return value_dim / heads; }
};

/// c[m x n] = a[m x k] * b[k x n]; c is overwritten.
template <typename T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);

/// out[b, o, y, x] = sum over (c, ky, kx) of input * kernel, zero padded.
template <typename T>
void conv2d_forward(const T* input, const T* kernel, T* out, const ConvDims& d);

/// grad_input is overwritten.
template <typename T>
void conv2d_backward_input(const T* grad_out, const T* kernel, T* grad_input, const ConvDims& d);

/// grad_kernel is overwritten.
template <typename T>
void conv2d_backward_kernel(const T* grad_out, const T* input, T* grad_kernel, const ConvDims& d);

/// probs receives the softmax weights, groups*heads blocks of q_len x kv_len.
template <typename T>
void attention_forward(const T* q, const T* k, const T* v, T* out, T* probs, const AttentionDims& d);

/// grad_q, grad_k, grad_v are overwritten.
template <typename T>
void attention_backward(const T* q, const T* k, const T* v, const T* probs, const T* grad_out, T* grad_q,
                        T* grad_k, T* grad_v, const AttentionDims& d);

namespace reference {

template <typename T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);

template <typename T>
void conv2d_forward(const T* input, const T* kernel, T* out, const ConvDims& d);

template <typename T>
void conv2d_backward_input(const T* grad_out, const T* kernel, T* grad_input, const ConvDims& d);

template <typename T>
void conv2d_backward_kernel(const T* grad_out, const T* input, T* grad_kernel, const ConvDims& d);

template <typename T>
void attention_forward(const T* q, const T* k, const T* v, T* out, T* probs, const AttentionDims& d);

template <typename T>
void attention_backward(const T* q, const T* k, const T* v, const T* probs, const T* grad_out, T* grad_q,
                        T* grad_k, T* grad_v, const AttentionDims& d);

}  // namespace reference

}  // namespace depthadapt::kernels
