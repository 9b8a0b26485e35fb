// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/kernels/reference.hpp"

#include <cstddef>

namespace krnet::kernels::reference {

template <typename T>
void gemm(Transpose trans_a, Transpose trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
          const T* b, T beta, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc{};
      for (std::size_t p = 0; p < k; ++p) {
        const T av = trans_a == Transpose::kNo ? a[i * k + p] : a[p * m + i];
        const T bv = trans_b == Transpose::kNo ? b[p * n + j] : b[j * k + p];
        acc += av * bv;
      }
      c[i * n + j] = alpha * acc + (beta == T{} ? T{} : beta * c[i * n + j]);
    }
  }
}

namespace {

// Input coordinate touched by output position `o` and kernel tap `t`, or -1 when it falls in padding.
long input_coord(std::size_t o, std::size_t t, const ConvGeometry& g, std::size_t extent) {
  const long x = static_cast<long>(o * g.stride + t) - static_cast<long>(g.pad);
  return (x < 0 || x >= static_cast<long>(extent)) ? -1 : x;
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* input, const T* weight, const T* bias, T* output) {
  const std::size_t kk = g.kernel;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          T acc = bias ? bias[co] : T{};
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t ky = 0; ky < kk; ++ky) {
              const long iy = input_coord(oy, ky, g, g.in_h);
              if (iy < 0) continue;
              for (std::size_t kx = 0; kx < kk; ++kx) {
                const long ix = input_coord(ox, kx, g, g.in_w);
                if (ix < 0) continue;
                acc += weight[((co * g.in_channels + ci) * kk + ky) * kk + kx] *
                       input[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix];
              }
            }
          }
          output[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* grad_output, const T* weight, T* grad_input) {
  const std::size_t kk = g.kernel;
  for (std::size_t i = 0; i < g.batch * g.in_channels * g.in_plane(); ++i) grad_input[i] = T{};
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const T go = grad_output[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox];
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t ky = 0; ky < kk; ++ky) {
              const long iy = input_coord(oy, ky, g, g.in_h);
              if (iy < 0) continue;
              for (std::size_t kx = 0; kx < kk; ++kx) {
                const long ix = input_coord(ox, kx, g, g.in_w);
                if (ix < 0) continue;
                grad_input[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix] +=
                    go * weight[((co * g.in_channels + ci) * kk + ky) * kk + kx];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, const T* grad_output, const T* input, T* grad_weight,
                            T* grad_bias) {
  const std::size_t kk = g.kernel;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const T go = grad_output[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox];
          if (grad_bias) grad_bias[co] += go;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t ky = 0; ky < kk; ++ky) {
              const long iy = input_coord(oy, ky, g, g.in_h);
              if (iy < 0) continue;
              for (std::size_t kx = 0; kx < kk; ++kx) {
                const long ix = input_coord(ox, kx, g, g.in_w);
                if (ix < 0) continue;
                grad_weight[((co * g.in_channels + ci) * kk + ky) * kk + kx] +=
                    go * input[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix];
              }
            }
          }
        }
      }
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

}  // namespace krnet::kernels::reference
