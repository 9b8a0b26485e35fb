// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/kernels/parallel.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace krnet::kernels::parallel {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

int thread_id() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

bool in_parallel() {
#ifdef _OPENMP
  return omp_in_parallel() != 0;
#else
  return false;
#endif
}

constexpr std::size_t kBlockK = 256;
constexpr std::size_t kBlockN = 1024;
// Target im2col scratch size (elements) per thread.
constexpr std::size_t kColBudget = std::size_t{1} << 18;

// C[m, n] += alpha * A * B where A(i, p) = a[i * a_rs + p * a_cs] and B is
// row-major [k, n]. Four rows of C are updated per pass over a B row so each
// B load feeds four FMAs.
template <typename T>
void gemm_core(std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a, std::size_t a_rs,
               std::size_t a_cs, const T* __restrict b, T* __restrict c) {
  for (std::size_t jc = 0; jc < n; jc += kBlockN) {
    const std::size_t nb = std::min(kBlockN, n - jc);
    for (std::size_t pc = 0; pc < k; pc += kBlockK) {
      const std::size_t kb = std::min(kBlockK, k - pc);
      std::size_t i = 0;
      for (; i + 4 <= m; i += 4) {
        T* __restrict c0 = c + i * n + jc;
        T* __restrict c1 = c0 + n;
        T* __restrict c2 = c1 + n;
        T* __restrict c3 = c2 + n;
        for (std::size_t p = pc; p < pc + kb; ++p) {
          const T a0 = alpha * a[i * a_rs + p * a_cs];
          const T a1 = alpha * a[(i + 1) * a_rs + p * a_cs];
          const T a2 = alpha * a[(i + 2) * a_rs + p * a_cs];
          const T a3 = alpha * a[(i + 3) * a_rs + p * a_cs];
          const T* __restrict br = b + p * n + jc;
#pragma omp simd
          for (std::size_t j = 0; j < nb; ++j) {
            const T bv = br[j];
            c0[j] += a0 * bv;
            c1[j] += a1 * bv;
            c2[j] += a2 * bv;
            c3[j] += a3 * bv;
          }
        }
      }
      for (; i < m; ++i) {
        T* __restrict c0 = c + i * n + jc;
        for (std::size_t p = pc; p < pc + kb; ++p) {
          const T a0 = alpha * a[i * a_rs + p * a_cs];
          const T* __restrict br = b + p * n + jc;
#pragma omp simd
          for (std::size_t j = 0; j < nb; ++j) c0[j] += a0 * br[j];
        }
      }
    }
  }
}

template <typename T>
void transpose(const T* src, std::size_t rows, std::size_t cols, T* dst) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::size_t r1 = std::min(rows, r0 + kTile);
      const std::size_t c1 = std::min(cols, c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t cc = c0; cc < c1; ++cc) dst[cc * rows + r] = src[r * cols + cc];
      }
    }
  }
}

template <typename T>
void scale_output(T* c, std::size_t count, T beta) {
  if (beta == T{}) {
    std::fill_n(c, count, T{});
  } else if (beta != T{1}) {
    for (std::size_t i = 0; i < count; ++i) c[i] *= beta;
  }
}

// Lower one chunk of samples [s0, s0 + count) to col[patch, count * out_plane].
template <typename T>
void im2col(const ConvGeometry& g, const T* input, std::size_t s0, std::size_t count, T* col) {
  const std::size_t plane = g.out_plane();
  const std::size_t cols = count * plane;
  const long pad = static_cast<long>(g.pad);
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        T* row = col + ((ci * g.kernel + ky) * g.kernel + kx) * cols;
        for (std::size_t s = 0; s < count; ++s) {
          const T* src = input + ((s0 + s) * g.in_channels + ci) * g.in_plane();
          T* dst = row + s * plane;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ky) - pad;
            T* drow = dst + oy * g.out_w;
            if (iy < 0 || iy >= static_cast<long>(g.in_h)) {
              std::fill_n(drow, g.out_w, T{});
              continue;
            }
            const T* srow = src + iy * g.in_w;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kx) - pad;
              drow[ox] = (ix < 0 || ix >= static_cast<long>(g.in_w)) ? T{} : srow[ix];
            }
          }
        }
      }
    }
  }
}

// Inverse of im2col: accumulate col[patch, count * out_plane] into grad_input.
template <typename T>
void col2im(const ConvGeometry& g, const T* col, std::size_t s0, std::size_t count, T* grad_input) {
  const std::size_t plane = g.out_plane();
  const std::size_t cols = count * plane;
  const long pad = static_cast<long>(g.pad);
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const T* row = col + ((ci * g.kernel + ky) * g.kernel + kx) * cols;
        for (std::size_t s = 0; s < count; ++s) {
          T* dst = grad_input + ((s0 + s) * g.in_channels + ci) * g.in_plane();
          const T* src = row + s * plane;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
            T* drow = dst + iy * g.in_w;
            const T* srow = src + oy * g.out_w;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kx) - pad;
              if (ix >= 0 && ix < static_cast<long>(g.in_w)) drow[ix] += srow[ox];
            }
          }
        }
      }
    }
  }
}

std::size_t chunk_size(const ConvGeometry& g) {
  const std::size_t per_sample = std::max<std::size_t>(1, g.patch_size() * g.out_plane());
  std::size_t chunk = std::max<std::size_t>(1, kColBudget / per_sample);
  const std::size_t threads = static_cast<std::size_t>(max_threads());
  if (threads > 1) chunk = std::min(chunk, (g.batch + threads - 1) / threads);
  return std::min(chunk, std::max<std::size_t>(1, g.batch));
}

}  // namespace

template <typename T>
void gemm(Transpose trans_a, Transpose trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
          const T* b, T beta, T* c) {
  scale_output(c, m * n, beta);
  if (m == 0 || n == 0 || k == 0) return;
  std::vector<T> b_buffer;
  const T* bp = b;
  if (trans_b == Transpose::kYes) {
    b_buffer.resize(k * n);
    transpose(b, n, k, b_buffer.data());
    bp = b_buffer.data();
  }
  const std::size_t a_rs = trans_a == Transpose::kNo ? k : 1;
  const std::size_t a_cs = trans_a == Transpose::kNo ? 1 : m;
  const std::size_t threads = static_cast<std::size_t>(max_threads());
  if (threads == 1 || in_parallel() || m * n * k < (std::size_t{1} << 16)) {
    gemm_core(m, n, k, alpha, a, a_rs, a_cs, bp, c);
    return;
  }
  const std::size_t rows_per = ((m + threads - 1) / threads + 3) / 4 * 4;
  const long blocks = static_cast<long>((m + rows_per - 1) / rows_per);
#pragma omp parallel for schedule(static)
  for (long blk = 0; blk < blocks; ++blk) {
    const std::size_t r0 = static_cast<std::size_t>(blk) * rows_per;
    const std::size_t rows = std::min(rows_per, m - r0);
    gemm_core(rows, n, k, alpha, a + r0 * a_rs, a_rs, a_cs, bp, c + r0 * n);
  }
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* input, const T* weight, const T* bias, T* output) {
  const std::size_t chunk = chunk_size(g);
  const long chunks = static_cast<long>((g.batch + chunk - 1) / chunk);
  const std::size_t patch = g.patch_size();
  const std::size_t plane = g.out_plane();
#pragma omp parallel
  {
    std::vector<T> col;
    std::vector<T> out;
#pragma omp for schedule(static)
    for (long ch = 0; ch < chunks; ++ch) {
      const std::size_t s0 = static_cast<std::size_t>(ch) * chunk;
      const std::size_t count = std::min(chunk, g.batch - s0);
      const std::size_t cols = count * plane;
      col.resize(patch * cols);
      out.assign(g.out_channels * cols, T{});
      im2col(g, input, s0, count, col.data());
      gemm_core(g.out_channels, cols, patch, T{1}, weight, patch, 1, col.data(), out.data());
      for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t co = 0; co < g.out_channels; ++co) {
          const T b = bias ? bias[co] : T{};
          const T* src = out.data() + co * cols + s * plane;
          T* dst = output + ((s0 + s) * g.out_channels + co) * plane;
          for (std::size_t q = 0; q < plane; ++q) dst[q] = src[q] + b;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* grad_output, const T* weight, T* grad_input) {
  std::fill_n(grad_input, g.batch * g.in_channels * g.in_plane(), T{});
  const std::size_t chunk = chunk_size(g);
  const long chunks = static_cast<long>((g.batch + chunk - 1) / chunk);
  const std::size_t patch = g.patch_size();
  const std::size_t plane = g.out_plane();
#pragma omp parallel
  {
    std::vector<T> col;
    std::vector<T> grad;
#pragma omp for schedule(static)
    for (long ch = 0; ch < chunks; ++ch) {
      const std::size_t s0 = static_cast<std::size_t>(ch) * chunk;
      const std::size_t count = std::min(chunk, g.batch - s0);
      const std::size_t cols = count * plane;
      grad.resize(g.out_channels * cols);
      for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t co = 0; co < g.out_channels; ++co) {
          std::memcpy(grad.data() + co * cols + s * plane, grad_output + ((s0 + s) * g.out_channels + co) * plane,
                      plane * sizeof(T));
        }
      }
      col.assign(patch * cols, T{});
      // col = W^T * grad, with W stored [Cout, patch].
      gemm_core(patch, cols, g.out_channels, T{1}, weight, 1, patch, grad.data(), col.data());
      col2im(g, col.data(), s0, count, grad_input);
    }
  }
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, const T* grad_output, const T* input, T* grad_weight,
                            T* grad_bias) {
  const std::size_t chunk = chunk_size(g);
  const long chunks = static_cast<long>((g.batch + chunk - 1) / chunk);
  const std::size_t patch = g.patch_size();
  const std::size_t plane = g.out_plane();
  const std::size_t wsize = g.weight_size();
  std::vector<std::vector<T>> partials(static_cast<std::size_t>(max_threads()));
#pragma omp parallel
  {
    std::vector<T>& acc = partials[static_cast<std::size_t>(thread_id())];
    acc.assign(wsize + g.out_channels, T{});
    std::vector<T> col;
    std::vector<T> col_t;
    std::vector<T> grad;
#pragma omp for schedule(static)
    for (long ch = 0; ch < chunks; ++ch) {
      const std::size_t s0 = static_cast<std::size_t>(ch) * chunk;
      const std::size_t count = std::min(chunk, g.batch - s0);
      const std::size_t cols = count * plane;
      grad.resize(g.out_channels * cols);
      for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t co = 0; co < g.out_channels; ++co) {
          std::memcpy(grad.data() + co * cols + s * plane, grad_output + ((s0 + s) * g.out_channels + co) * plane,
                      plane * sizeof(T));
        }
      }
      col.resize(patch * cols);
      col_t.resize(patch * cols);
      im2col(g, input, s0, count, col.data());
      transpose(col.data(), patch, cols, col_t.data());
      gemm_core(g.out_channels, patch, cols, T{1}, grad.data(), cols, 1, col_t.data(), acc.data());
      for (std::size_t co = 0; co < g.out_channels; ++co) {
        T sum{};
        const T* row = grad.data() + co * cols;
        for (std::size_t q = 0; q < cols; ++q) sum += row[q];
        acc[wsize + co] += sum;
      }
    }
  }
  for (const auto& acc : partials) {
    if (acc.empty()) continue;
    for (std::size_t i = 0; i < wsize; ++i) grad_weight[i] += acc[i];
    if (grad_bias) {
      for (std::size_t co = 0; co < g.out_channels; ++co) grad_bias[co] += acc[wsize + co];
    }
  }
}

#define KRNET_INSTANTIATE(T)                                                                                  \
  template void gemm<T>(Transpose, Transpose, std::size_t, std::size_t, std::size_t, T, const T*, const T*, T, \
                        T*);                                                                                   \
  template void conv2d_forward<T>(const ConvGeometry&, const T*, const T*, const T*, T*);                      \
  template void conv2d_backward_input<T>(const ConvGeometry&, const T*, const T*, T*);                         \
  template void conv2d_backward_weight<T>(const ConvGeometry&, const T*, const T*, T*, T*);

KRNET_INSTANTIATE(float)
KRNET_INSTANTIATE(double)
#undef KRNET_INSTANTIATE

}  // namespace krnet::kernels::parallel
