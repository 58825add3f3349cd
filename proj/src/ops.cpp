// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthadapt/ops.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "depthadapt/errors.hpp"
#include "depthadapt/kernels.hpp"

namespace depthadapt {

namespace {

template <typename T>
using Grads = std::span<std::vector<T>*>;

// Index of the operand element feeding output element i.
struct Broadcast {
  Shape shape;
  std::size_t a_mod = 0;  // 0 means "same index"
  std::size_t b_mod = 0;

  std::size_t a_index(std::size_t i) const { return a_mod ? i % a_mod : i; }
  std::size_t b_index(std::size_t i) const { return b_mod ? i % b_mod : i; }
};

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

Broadcast broadcast(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return {a, 0, 0};
  const auto na = shape_numel(a);
  const auto nb = shape_numel(b);
  if (nb == 1) return {a, 0, 1};
  if (na == 1) return {b, 1, 0};
  if (is_suffix(b, a)) return {a, 0, nb};
  if (is_suffix(a, b)) return {b, na, 0};
  fail(ErrorCategory::Dimension,
       std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) + " do not broadcast");
}

template <typename T, typename F, typename DA, typename DB>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, const char* name, F f, DA da, DB db) {
  const Broadcast bc = broadcast(a.shape(), b.shape(), name);
  const auto n = shape_numel(bc.shape);
  std::vector<T> out(n);
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[bc.a_index(i)], bv[bc.b_index(i)]);
  return Tensor<T>::make_result(
      bc.shape, std::move(out), {a, b}, [bc, da, db](const detail::Node<T>& self, std::span<const T> g, Grads<T> pg) {
        const auto& av = self.parents[0]->value;
        const auto& bv = self.parents[1]->value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const T x = av[bc.a_index(i)];
          const T y = bv[bc.b_index(i)];
          if (pg[0]) (*pg[0])[bc.a_index(i)] += da(x, y, g[i]);
          if (pg[1]) (*pg[1])[bc.b_index(i)] += db(x, y, g[i]);
        }
      });
}

// f(x) with derivative expressed through input x and output y.
template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& a, F f, D d) {
  const auto av = a.data();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return Tensor<T>::make_result(a.shape(), std::move(out), {a},
                                [d](const detail::Node<T>& self, std::span<const T> g, Grads<T> pg) {
                                  const auto& x = self.parents[0]->value;
                                  const auto& y = self.value;
                                  auto& gx = *pg[0];
                                  for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * d(x[i], y[i]);
                                });
}

template <typename T>
void require_matrix(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) fail(ErrorCategory::Dimension, std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

template <typename T>
std::vector<T> transposed(std::span<const T> a, std::size_t rows, std::size_t cols) {
  std::vector<T> t(a.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
  return t;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T, T g) { return g; }, [](T, T, T g) { return g; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T, T g) { return g; }, [](T, T, T g) { return -g; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y, T g) { return g * y; },
      [](T x, T, T g) { return g * x; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary(a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset) {
  return unary(a, [offset](T x) { return x + offset; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return unary(a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary(
      a, [](T x) { return T(1) / (T(1) + std::exp(-x)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  constexpr T c = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T k = static_cast<T>(0.044715);
  return unary(
      a,
      [](T x) { return T(0.5) * x * (T(1) + std::tanh(c * (x + k * x * x * x))); },
      [](T x, T) {
        const T th = std::tanh(c * (x + k * x * x * x));
        const T dinner = c * (T(1) + T(3) * k * x * x);
        return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * dinner;
      });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  for (auto x : a.data()) {
    if (!(x > T(0))) fail(ErrorCategory::Domain, "log of non-positive value " + std::to_string(x));
  }
  return unary(a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Tensor<T> reciprocal(const Tensor<T>& a) {
  for (auto x : a.data()) {
    if (x == T(0)) fail(ErrorCategory::Domain, "reciprocal of zero");
  }
  return unary(a, [](T x) { return T(1) / x; }, [](T, T y) { return -y * y; });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = 0;
  for (auto x : a.data()) total += x;
  return Tensor<T>::make_result(Shape{1}, {total}, {a},
                                [](const detail::Node<T>&, std::span<const T> g, Grads<T> pg) {
                                  for (auto& x : *pg[0]) x += g[0];
                                });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  T total = 0;
  for (auto x : a.data()) total += x;
  const T inv = T(1) / static_cast<T>(a.numel());
  return Tensor<T>::make_result(Shape{1}, {total * inv}, {a},
                                [inv](const detail::Node<T>&, std::span<const T> g, Grads<T> pg) {
                                  for (auto& x : *pg[0]) x += g[0] * inv;
                                });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    fail(ErrorCategory::Dimension, "matmul: inner extents differ for " + shape_str(a.shape()) + " and " +
                                       shape_str(b.shape()));
  }
  std::vector<T> out(m * n);
  kernels::matmul(a.data().data(), b.data().data(), out.data(), m, k, n);
  return Tensor<T>::make_result(
      Shape{m, n}, std::move(out), {a, b}, [m, k, n](const detail::Node<T>& self, std::span<const T> g, Grads<T> pg) {
        std::vector<T> tmp;
        if (pg[0]) {  // dA = G B^T
          const auto bt = transposed<T>(self.parents[1]->value, k, n);
          tmp.resize(m * k);
          kernels::matmul(g.data(), bt.data(), tmp.data(), m, n, k);
          for (std::size_t i = 0; i < tmp.size(); ++i) (*pg[0])[i] += tmp[i];
        }
        if (pg[1]) {  // dB = A^T G
          const auto at = transposed<T>(self.parents[0]->value, m, k);
          tmp.resize(k * n);
          kernels::matmul(at.data(), g.data(), tmp.data(), k, m, n);
          for (std::size_t i = 0; i < tmp.size(); ++i) (*pg[1])[i] += tmp[i];
        }
      });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_matrix(a, "transpose");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  return Tensor<T>::make_result(Shape{cols, rows}, transposed<T>(a.data(), rows, cols), {a},
                                [rows, cols](const detail::Node<T>&, std::span<const T> g, Grads<T> pg) {
                                  auto& ga = *pg[0];
                                  for (std::size_t i = 0; i < rows; ++i)
                                    for (std::size_t j = 0; j < cols; ++j) ga[i * cols + j] += g[j * rows + i];
                                });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    fail(ErrorCategory::Dimension, "reshape: " + shape_str(a.shape()) + " cannot become " + shape_str(shape));
  }
  return Tensor<T>::make_result(std::move(shape), std::vector<T>(a.data().begin(), a.data().end()), {a},
                                [](const detail::Node<T>&, std::span<const T> g, Grads<T> pg) {
                                  auto& ga = *pg[0];
                                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                                });
}

template <typename T>
Tensor<T> gather(const Tensor<T>& a, Shape shape, std::vector<std::size_t> indices) {
  if (shape_numel(shape) != indices.size()) {
    fail(ErrorCategory::Dimension, "gather: " + std::to_string(indices.size()) + " indices for shape " +
                                       shape_str(shape));
  }
  const auto av = a.data();
  std::vector<T> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= av.size()) fail(ErrorCategory::Dimension, "gather: index out of range");
    out[i] = av[indices[i]];
  }
  return Tensor<T>::make_result(std::move(shape), std::move(out), {a},
                                [idx = std::move(indices)](const detail::Node<T>&, std::span<const T> g, Grads<T> pg) {
                                  auto& ga = *pg[0];
                                  for (std::size_t i = 0; i < idx.size(); ++i) ga[idx[i]] += g[i];
                                });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias) {
  auto y = matmul(x, transpose(w));
  return bias ? add(y, *bias) : y;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, std::size_t stride, std::size_t pad) {
  if (input.rank() != 4 || kernel.rank() != 4) {
    fail(ErrorCategory::Dimension, "conv2d: expected 4-D input and kernel, got " + shape_str(input.shape()) +
                                       " and " + shape_str(kernel.shape()));
  }
  if (kernel.dim(1) != input.dim(1)) {
    fail(ErrorCategory::Dimension, "conv2d: channel mismatch between input " + shape_str(input.shape()) +
                                       " and kernel " + shape_str(kernel.shape()));
  }
  if (stride == 0) fail(ErrorCategory::Configuration, "conv2d: stride must be positive");
  kernels::ConvDims d;
  d.batch = input.dim(0);
  d.in_channels = input.dim(1);
  d.height = input.dim(2);
  d.width = input.dim(3);
  d.out_channels = kernel.dim(0);
  d.kernel_h = kernel.dim(2);
  d.kernel_w = kernel.dim(3);
  d.stride = stride;
  d.pad = pad;
  const std::size_t span_h = d.height + 2 * pad;
  const std::size_t span_w = d.width + 2 * pad;
  if (d.kernel_h > span_h || d.kernel_w > span_w || (span_h - d.kernel_h) % stride != 0 ||
      (span_w - d.kernel_w) % stride != 0) {
    fail(ErrorCategory::Configuration, "conv2d: output extent is not integral for input " +
                                           shape_str(input.shape()) + ", kernel " + shape_str(kernel.shape()) +
                                           ", stride " + std::to_string(stride) + ", pad " + std::to_string(pad));
  }
  d.out_h = (span_h - d.kernel_h) / stride + 1;
  d.out_w = (span_w - d.kernel_w) / stride + 1;
  std::vector<T> out(d.batch * d.out_channels * d.out_plane());
  kernels::conv2d_forward(input.data().data(), kernel.data().data(), out.data(), d);
  return Tensor<T>::make_result(
      Shape{d.batch, d.out_channels, d.out_h, d.out_w}, std::move(out), {input, kernel},
      [d](const detail::Node<T>& self, std::span<const T> g, Grads<T> pg) {
        const auto& in = self.parents[0]->value;
        const auto& ker = self.parents[1]->value;
        std::vector<T> tmp;
        if (pg[0]) {
          tmp.resize(in.size());
          kernels::conv2d_backward_input(g.data(), ker.data(), tmp.data(), d);
          for (std::size_t i = 0; i < tmp.size(); ++i) (*pg[0])[i] += tmp[i];
        }
        if (pg[1]) {
          tmp.resize(ker.size());
          kernels::conv2d_backward_kernel(g.data(), in.data(), tmp.data(), d);
          for (std::size_t i = 0; i < tmp.size(); ++i) (*pg[1])[i] += tmp[i];
        }
      });
}

namespace {

template <typename T>
kernels::AttentionDims attention_dims(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>* v,
                                      std::size_t heads, std::size_t groups) {
  require_matrix(q, "attention");
  require_matrix(k, "attention");
  if (heads == 0 || groups == 0) fail(ErrorCategory::Configuration, "attention: heads and groups must be positive");
  if (k.dim(0) == 0 || k.dim(0) < groups) fail(ErrorCategory::Dimension, "attention: empty context (no keys)");
  if (q.dim(1) != k.dim(1)) {
    fail(ErrorCategory::Dimension,
         "attention: query " + shape_str(q.shape()) + " and key " + shape_str(k.shape()) + " feature extents differ");
  }
  if (q.dim(0) % groups != 0 || k.dim(0) % groups != 0) {
    fail(ErrorCategory::Dimension, "attention: rows do not split into " + std::to_string(groups) + " groups");
  }
  kernels::AttentionDims d;
  d.groups = groups;
  d.heads = heads;
  d.q_len = q.dim(0) / groups;
  d.kv_len = k.dim(0) / groups;
  d.dim = q.dim(1);
  d.value_dim = heads;
  if (v) {
    require_matrix(*v, "attention");
    if (v->dim(0) != k.dim(0)) {
      fail(ErrorCategory::Dimension,
           "attention: key " + shape_str(k.shape()) + " and value " + shape_str(v->shape()) + " lengths differ");
    }
    d.value_dim = v->dim(1);
  }
  if (d.dim % heads != 0 || d.value_dim % heads != 0) {
    fail(ErrorCategory::Dimension, "attention: feature extents do not split into " + std::to_string(heads) + " heads");
  }
  return d;
}

}  // namespace

template <typename T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads,
                               std::size_t groups) {
  const auto d = attention_dims(q, k, &v, heads, groups);
  std::vector<T> out(d.groups * d.q_len * d.value_dim);
  auto probs = std::make_shared<std::vector<T>>(d.groups * d.heads * d.q_len * d.kv_len);
  kernels::attention_forward(q.data().data(), k.data().data(), v.data().data(), out.data(), probs->data(), d);
  return Tensor<T>::make_result(
      Shape{d.groups * d.q_len, d.value_dim}, std::move(out), {q, k, v},
      [d, probs](const detail::Node<T>& self, std::span<const T> g, Grads<T> pg) {
        const auto& qv = self.parents[0]->value;
        const auto& kv = self.parents[1]->value;
        const auto& vv = self.parents[2]->value;
        std::vector<T> gq(qv.size()), gk(kv.size()), gv(vv.size());
        kernels::attention_backward(qv.data(), kv.data(), vv.data(), probs->data(), g.data(), gq.data(), gk.data(),
                                    gv.data(), d);
        const std::vector<T>* src[3] = {&gq, &gk, &gv};
        for (int p = 0; p < 3; ++p) {
          if (!pg[p]) continue;
          for (std::size_t i = 0; i < src[p]->size(); ++i) (*pg[p])[i] += (*src[p])[i];
        }
      });
}

template <typename T>
std::vector<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k, std::size_t heads, std::size_t groups) {
  auto d = attention_dims(q, k, static_cast<const Tensor<T>*>(nullptr), heads, groups);
  std::vector<T> v(d.groups * d.kv_len * d.value_dim, T(0));
  std::vector<T> out(d.groups * d.q_len * d.value_dim);
  std::vector<T> probs(d.groups * d.heads * d.q_len * d.kv_len);
  kernels::attention_forward(q.data().data(), k.data().data(), v.data(), out.data(), probs.data(), d);
  return probs;
}

#define DEPTHADAPT_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> scale(const Tensor<T>&, T);                                                       \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                                  \
  template Tensor<T> relu(const Tensor<T>&);                                                           \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                        \
  template Tensor<T> gelu(const Tensor<T>&);                                                           \
  template Tensor<T> log(const Tensor<T>&);                                                            \
  template Tensor<T> square(const Tensor<T>&);                                                         \
  template Tensor<T> reciprocal(const Tensor<T>&);                                                     \
  template Tensor<T> sum(const Tensor<T>&);                                                            \
  template Tensor<T> mean(const Tensor<T>&);                                                           \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> transpose(const Tensor<T>&);                                                      \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                 \
  template Tensor<T> gather(const Tensor<T>&, Shape, std::vector<std::size_t>);                        \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*);                     \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t);             \
  template Tensor<T> scaled_dot_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                          std::size_t, std::size_t);                                   \
  template std::vector<T> attention_weights(const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t);

DEPTHADAPT_INSTANTIATE_OPS(float)
DEPTHADAPT_INSTANTIATE_OPS(double)

#undef DEPTHADAPT_INSTANTIATE_OPS

}  // namespace depthadapt
