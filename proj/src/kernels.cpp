// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthadapt/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace depthadapt::kernels {

namespace {

using Index = std::ptrdiff_t;

// col is patch_size x out_plane for one batch element.
template <typename T>
void im2col(const T* image, T* col, const ConvDims& d) {
  const std::size_t plane = d.out_plane();
  for (std::size_t c = 0; c < d.in_channels; ++c) {
    const T* chan = image + c * d.height * d.width;
    for (std::size_t ky = 0; ky < d.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < d.kernel_w; ++kx) {
        T* row = col + ((c * d.kernel_h + ky) * d.kernel_w + kx) * plane;
        for (std::size_t oy = 0; oy < d.out_h; ++oy) {
          const auto iy = static_cast<Index>(oy * d.stride + ky) - static_cast<Index>(d.pad);
          for (std::size_t ox = 0; ox < d.out_w; ++ox) {
            const auto ix = static_cast<Index>(ox * d.stride + kx) - static_cast<Index>(d.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<Index>(d.height) &&
                                ix < static_cast<Index>(d.width);
            row[oy * d.out_w + ox] = inside ? chan[iy * static_cast<Index>(d.width) + ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, T* image, const ConvDims& d) {
  const std::size_t plane = d.out_plane();
  for (std::size_t c = 0; c < d.in_channels; ++c) {
    T* chan = image + c * d.height * d.width;
    for (std::size_t ky = 0; ky < d.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < d.kernel_w; ++kx) {
        const T* row = col + ((c * d.kernel_h + ky) * d.kernel_w + kx) * plane;
        for (std::size_t oy = 0; oy < d.out_h; ++oy) {
          const auto iy = static_cast<Index>(oy * d.stride + ky) - static_cast<Index>(d.pad);
          if (iy < 0 || iy >= static_cast<Index>(d.height)) continue;
          for (std::size_t ox = 0; ox < d.out_w; ++ox) {
            const auto ix = static_cast<Index>(ox * d.stride + kx) - static_cast<Index>(d.pad);
            if (ix < 0 || ix >= static_cast<Index>(d.width)) continue;
            chan[iy * static_cast<Index>(d.width) + ix] += row[oy * d.out_w + ox];
          }
        }
      }
    }
  }
}

// Serial row kernel shared by matmul and the im2col conv path: c_row = a_row * b.
template <typename T>
inline void gemm_row(const T* a_row, const T* b, T* c_row, std::size_t k, std::size_t n) {
  std::fill(c_row, c_row + n, T(0));
  for (std::size_t t = 0; t < k; ++t) {
    const T av = a_row[t];
    const T* b_row = b + t * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

template <typename T>
void softmax_row(T* row, std::size_t n) {
  T mx = row[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
  T total = 0;
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] - mx);
    total += row[j];
  }
  for (std::size_t j = 0; j < n; ++j) row[j] /= total;
}

}  // namespace

template <typename T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(m); ++i) {
    gemm_row(a + i * k, b, c + i * n, k, n);
  }
}

template <typename T>
void conv2d_forward(const T* input, const T* kernel, T* out, const ConvDims& d) {
  const std::size_t patch = d.patch_size();
  const std::size_t plane = d.out_plane();
  const std::size_t image = d.in_channels * d.height * d.width;
#pragma omp parallel
  {
    std::vector<T> col(patch * plane);
#pragma omp for schedule(static)
    for (Index b = 0; b < static_cast<Index>(d.batch); ++b) {
      im2col(input + b * image, col.data(), d);
      T* out_b = out + b * d.out_channels * plane;
      for (std::size_t o = 0; o < d.out_channels; ++o) {
        gemm_row(kernel + o * patch, col.data(), out_b + o * plane, patch, plane);
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const T* grad_out, const T* kernel, T* grad_input, const ConvDims& d) {
  const std::size_t patch = d.patch_size();
  const std::size_t plane = d.out_plane();
  const std::size_t image = d.in_channels * d.height * d.width;
  std::vector<T> kernel_t(patch * d.out_channels);
  for (std::size_t o = 0; o < d.out_channels; ++o)
    for (std::size_t t = 0; t < patch; ++t) kernel_t[t * d.out_channels + o] = kernel[o * patch + t];
#pragma omp parallel
  {
    std::vector<T> dcol(patch * plane);
#pragma omp for schedule(static)
    for (Index b = 0; b < static_cast<Index>(d.batch); ++b) {
      const T* g = grad_out + b * d.out_channels * plane;
      for (std::size_t t = 0; t < patch; ++t) {
        gemm_row(kernel_t.data() + t * d.out_channels, g, dcol.data() + t * plane, d.out_channels, plane);
      }
      T* gin = grad_input + b * image;
      std::fill(gin, gin + image, T(0));
      col2im_add(dcol.data(), gin, d);
    }
  }
}

template <typename T>
void conv2d_backward_kernel(const T* grad_out, const T* input, T* grad_kernel, const ConvDims& d) {
  const std::size_t patch = d.patch_size();
  const std::size_t plane = d.out_plane();
  const std::size_t image = d.in_channels * d.height * d.width;
  std::vector<T> cols(d.batch * patch * plane);
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < static_cast<Index>(d.batch); ++b) {
    im2col(input + b * image, cols.data() + b * patch * plane, d);
  }
#pragma omp parallel for schedule(static)
  for (Index o = 0; o < static_cast<Index>(d.out_channels); ++o) {
    T* gk = grad_kernel + o * patch;
    std::fill(gk, gk + patch, T(0));
    for (std::size_t b = 0; b < d.batch; ++b) {
      const T* g = grad_out + (b * d.out_channels + o) * plane;
      const T* col = cols.data() + b * patch * plane;
      for (std::size_t t = 0; t < patch; ++t) {
        const T* row = col + t * plane;
        T acc = 0;
        for (std::size_t j = 0; j < plane; ++j) acc += g[j] * row[j];
        gk[t] += acc;
      }
    }
  }
}

template <typename T>
void attention_forward(const T* q, const T* k, const T* v, T* out, T* probs, const AttentionDims& d) {
  const std::size_t dh = d.head_dim();
  const std::size_t dvh = d.head_value_dim();
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const auto blocks = static_cast<Index>(d.groups * d.heads);
#pragma omp parallel for schedule(static)
  for (Index blk = 0; blk < blocks; ++blk) {
    const std::size_t g = static_cast<std::size_t>(blk) / d.heads;
    const std::size_t h = static_cast<std::size_t>(blk) % d.heads;
    T* p = probs + static_cast<std::size_t>(blk) * d.q_len * d.kv_len;
    for (std::size_t i = 0; i < d.q_len; ++i) {
      const T* qi = q + (g * d.q_len + i) * d.dim + h * dh;
      T* prow = p + i * d.kv_len;
      for (std::size_t j = 0; j < d.kv_len; ++j) {
        const T* kj = k + (g * d.kv_len + j) * d.dim + h * dh;
        T s = 0;
        for (std::size_t t = 0; t < dh; ++t) s += qi[t] * kj[t];
        prow[j] = s * scale;
      }
      softmax_row(prow, d.kv_len);
      T* oi = out + (g * d.q_len + i) * d.value_dim + h * dvh;
      std::fill(oi, oi + dvh, T(0));
      for (std::size_t j = 0; j < d.kv_len; ++j) {
        const T pj = prow[j];
        const T* vj = v + (g * d.kv_len + j) * d.value_dim + h * dvh;
        for (std::size_t t = 0; t < dvh; ++t) oi[t] += pj * vj[t];
      }
    }
  }
}

template <typename T>
void attention_backward(const T* q, const T* k, const T* v, const T* probs, const T* grad_out, T* grad_q,
                        T* grad_k, T* grad_v, const AttentionDims& d) {
  const std::size_t dh = d.head_dim();
  const std::size_t dvh = d.head_value_dim();
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const auto blocks = static_cast<Index>(d.groups * d.heads);
#pragma omp parallel
  {
    std::vector<T> dscore(d.kv_len);
#pragma omp for schedule(static)
    for (Index blk = 0; blk < blocks; ++blk) {
      const std::size_t g = static_cast<std::size_t>(blk) / d.heads;
      const std::size_t h = static_cast<std::size_t>(blk) % d.heads;
      const T* p = probs + static_cast<std::size_t>(blk) * d.q_len * d.kv_len;
      for (std::size_t i = 0; i < d.q_len; ++i) {
        T* gq = grad_q + (g * d.q_len + i) * d.dim + h * dh;
        std::fill(gq, gq + dh, T(0));
      }
      for (std::size_t j = 0; j < d.kv_len; ++j) {
        T* gk = grad_k + (g * d.kv_len + j) * d.dim + h * dh;
        T* gv = grad_v + (g * d.kv_len + j) * d.value_dim + h * dvh;
        std::fill(gk, gk + dh, T(0));
        std::fill(gv, gv + dvh, T(0));
      }
      for (std::size_t i = 0; i < d.q_len; ++i) {
        const T* go = grad_out + (g * d.q_len + i) * d.value_dim + h * dvh;
        const T* prow = p + i * d.kv_len;
        T weighted = 0;
        for (std::size_t j = 0; j < d.kv_len; ++j) {
          const T* vj = v + (g * d.kv_len + j) * d.value_dim + h * dvh;
          T* gv = grad_v + (g * d.kv_len + j) * d.value_dim + h * dvh;
          T dp = 0;
          for (std::size_t t = 0; t < dvh; ++t) {
            dp += go[t] * vj[t];
            gv[t] += prow[j] * go[t];
          }
          dscore[j] = dp;
          weighted += prow[j] * dp;
        }
        const T* qi = q + (g * d.q_len + i) * d.dim + h * dh;
        T* gq = grad_q + (g * d.q_len + i) * d.dim + h * dh;
        for (std::size_t j = 0; j < d.kv_len; ++j) {
          const T ds = prow[j] * (dscore[j] - weighted) * scale;
          const T* kj = k + (g * d.kv_len + j) * d.dim + h * dh;
          T* gk = grad_k + (g * d.kv_len + j) * d.dim + h * dh;
          for (std::size_t t = 0; t < dh; ++t) {
            gq[t] += ds * kj[t];
            gk[t] += ds * qi[t];
          }
        }
      }
    }
  }
}

namespace reference {

template <typename T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = 0;
      for (std::size_t t = 0; t < k; ++t) acc += a[i * k + t] * b[t * n + j];
      c[i * n + j] = acc;
    }
  }
}

template <typename T>
void conv2d_forward(const T* input, const T* kernel, T* out, const ConvDims& d) {
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t o = 0; o < d.out_channels; ++o) {
      for (std::size_t oy = 0; oy < d.out_h; ++oy) {
        for (std::size_t ox = 0; ox < d.out_w; ++ox) {
          T acc = 0;
          for (std::size_t c = 0; c < d.in_channels; ++c) {
            for (std::size_t ky = 0; ky < d.kernel_h; ++ky) {
              for (std::size_t kx = 0; kx < d.kernel_w; ++kx) {
                const auto iy = static_cast<Index>(oy * d.stride + ky) - static_cast<Index>(d.pad);
                const auto ix = static_cast<Index>(ox * d.stride + kx) - static_cast<Index>(d.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<Index>(d.height) || ix >= static_cast<Index>(d.width))
                  continue;
                acc += input[((b * d.in_channels + c) * d.height + iy) * d.width + ix] *
                       kernel[((o * d.in_channels + c) * d.kernel_h + ky) * d.kernel_w + kx];
              }
            }
          }
          out[((b * d.out_channels + o) * d.out_h + oy) * d.out_w + ox] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const T* grad_out, const T* kernel, T* grad_input, const ConvDims& d) {
  std::fill(grad_input, grad_input + d.batch * d.in_channels * d.height * d.width, T(0));
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t o = 0; o < d.out_channels; ++o)
      for (std::size_t oy = 0; oy < d.out_h; ++oy)
        for (std::size_t ox = 0; ox < d.out_w; ++ox) {
          const T g = grad_out[((b * d.out_channels + o) * d.out_h + oy) * d.out_w + ox];
          for (std::size_t c = 0; c < d.in_channels; ++c)
            for (std::size_t ky = 0; ky < d.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < d.kernel_w; ++kx) {
                const auto iy = static_cast<Index>(oy * d.stride + ky) - static_cast<Index>(d.pad);
                const auto ix = static_cast<Index>(ox * d.stride + kx) - static_cast<Index>(d.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<Index>(d.height) || ix >= static_cast<Index>(d.width))
                  continue;
                grad_input[((b * d.in_channels + c) * d.height + iy) * d.width + ix] +=
                    g * kernel[((o * d.in_channels + c) * d.kernel_h + ky) * d.kernel_w + kx];
              }
        }
}

template <typename T>
void conv2d_backward_kernel(const T* grad_out, const T* input, T* grad_kernel, const ConvDims& d) {
  std::fill(grad_kernel, grad_kernel + d.out_channels * d.patch_size(), T(0));
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t o = 0; o < d.out_channels; ++o)
      for (std::size_t oy = 0; oy < d.out_h; ++oy)
        for (std::size_t ox = 0; ox < d.out_w; ++ox) {
          const T g = grad_out[((b * d.out_channels + o) * d.out_h + oy) * d.out_w + ox];
          for (std::size_t c = 0; c < d.in_channels; ++c)
            for (std::size_t ky = 0; ky < d.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < d.kernel_w; ++kx) {
                const auto iy = static_cast<Index>(oy * d.stride + ky) - static_cast<Index>(d.pad);
                const auto ix = static_cast<Index>(ox * d.stride + kx) - static_cast<Index>(d.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<Index>(d.height) || ix >= static_cast<Index>(d.width))
                  continue;
                grad_kernel[((o * d.in_channels + c) * d.kernel_h + ky) * d.kernel_w + kx] +=
                    g * input[((b * d.in_channels + c) * d.height + iy) * d.width + ix];
              }
        }
}

template <typename T>
void attention_forward(const T* q, const T* k, const T* v, T* out, T* probs, const AttentionDims& d) {
  const std::size_t dh = d.head_dim();
  const std::size_t dvh = d.head_value_dim();
  for (std::size_t g = 0; g < d.groups; ++g) {
    for (std::size_t h = 0; h < d.heads; ++h) {
      T* p = probs + (g * d.heads + h) * d.q_len * d.kv_len;
      for (std::size_t i = 0; i < d.q_len; ++i) {
        std::vector<T> s(d.kv_len);
        for (std::size_t j = 0; j < d.kv_len; ++j) {
          T acc = 0;
          for (std::size_t t = 0; t < dh; ++t)
            acc += q[(g * d.q_len + i) * d.dim + h * dh + t] * k[(g * d.kv_len + j) * d.dim + h * dh + t];
          s[j] = acc / std::sqrt(static_cast<T>(dh));
        }
        const T mx = *std::max_element(s.begin(), s.end());
        T total = 0;
        for (auto& x : s) total += (x = std::exp(x - mx));
        for (std::size_t j = 0; j < d.kv_len; ++j) p[i * d.kv_len + j] = s[j] / total;
        for (std::size_t t = 0; t < dvh; ++t) {
          T acc = 0;
          for (std::size_t j = 0; j < d.kv_len; ++j)
            acc += p[i * d.kv_len + j] * v[(g * d.kv_len + j) * d.value_dim + h * dvh + t];
          out[(g * d.q_len + i) * d.value_dim + h * dvh + t] = acc;
        }
      }
    }
  }
}

template <typename T>
void attention_backward(const T* q, const T* k, const T* v, const T* probs, const T* grad_out, T* grad_q,
                        T* grad_k, T* grad_v, const AttentionDims& d) {
  const std::size_t dh = d.head_dim();
  const std::size_t dvh = d.head_value_dim();
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  std::fill(grad_q, grad_q + d.groups * d.q_len * d.dim, T(0));
  std::fill(grad_k, grad_k + d.groups * d.kv_len * d.dim, T(0));
  std::fill(grad_v, grad_v + d.groups * d.kv_len * d.value_dim, T(0));
  for (std::size_t g = 0; g < d.groups; ++g) {
    for (std::size_t h = 0; h < d.heads; ++h) {
      const T* p = probs + (g * d.heads + h) * d.q_len * d.kv_len;
      for (std::size_t i = 0; i < d.q_len; ++i) {
        std::vector<T> dp(d.kv_len);
        for (std::size_t j = 0; j < d.kv_len; ++j) {
          T acc = 0;
          for (std::size_t t = 0; t < dvh; ++t)
            acc += grad_out[(g * d.q_len + i) * d.value_dim + h * dvh + t] *
                   v[(g * d.kv_len + j) * d.value_dim + h * dvh + t];
          dp[j] = acc;
          for (std::size_t t = 0; t < dvh; ++t)
            grad_v[(g * d.kv_len + j) * d.value_dim + h * dvh + t] +=
                p[i * d.kv_len + j] * grad_out[(g * d.q_len + i) * d.value_dim + h * dvh + t];
        }
        T weighted = 0;
        for (std::size_t j = 0; j < d.kv_len; ++j) weighted += p[i * d.kv_len + j] * dp[j];
        for (std::size_t j = 0; j < d.kv_len; ++j) {
          const T ds = p[i * d.kv_len + j] * (dp[j] - weighted) * scale;
          for (std::size_t t = 0; t < dh; ++t) {
            grad_q[(g * d.q_len + i) * d.dim + h * dh + t] += ds * k[(g * d.kv_len + j) * d.dim + h * dh + t];
            grad_k[(g * d.kv_len + j) * d.dim + h * dh + t] += ds * q[(g * d.q_len + i) * d.dim + h * dh + t];
          }
        }
      }
    }
  }
}

}  // namespace reference

}  // namespace depthadapt::kernels

using depthadapt::kernels::AttentionDims;
using depthadapt::kernels::ConvDims;

#define DEPTHADAPT_INSTANTIATE_KERNELS(NS, T)                                                          \
  template void NS::matmul<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);          \
  template void NS::conv2d_forward<T>(const T*, const T*, T*, const ConvDims&);                        \
  template void NS::conv2d_backward_input<T>(const T*, const T*, T*, const ConvDims&);                 \
  template void NS::conv2d_backward_kernel<T>(const T*, const T*, T*, const ConvDims&);                \
  template void NS::attention_forward<T>(const T*, const T*, const T*, T*, T*, const AttentionDims&);  \
  template void NS::attention_backward<T>(const T*, const T*, const T*, const T*, const T*, T*, T*, T*, \
                                          const AttentionDims&);

DEPTHADAPT_INSTANTIATE_KERNELS(depthadapt::kernels, float)
DEPTHADAPT_INSTANTIATE_KERNELS(depthadapt::kernels, double)
DEPTHADAPT_INSTANTIATE_KERNELS(depthadapt::kernels::reference, float)
DEPTHADAPT_INSTANTIATE_KERNELS(depthadapt::kernels::reference, double)

#undef DEPTHADAPT_INSTANTIATE_KERNELS
