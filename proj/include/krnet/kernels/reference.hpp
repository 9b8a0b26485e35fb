// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Serial, loop-literal kernels. These are the oracle for the parallel
// kernels and are not used on any training path.

#include "krnet/kernels/conv_geometry.hpp"

namespace krnet::kernels::reference {

/// C = alpha * op(A) * op(B) + beta * C, all row-major and contiguous.
/// op(A) is M x K, op(B) is K x N.
template <typename T>
void gemm(Transpose trans_a, Transpose trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
          const T* b, T beta, T* c);

/// output[N, Cout, Ho, Wo] = conv(input[N, Cin, Hi, Wi], weight[Cout, Cin, k, k]) + bias.
/// `bias` may be null.
template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* input, const T* weight, const T* bias, T* output);

/// grad_input = d(conv)/d(input)^T grad_output. Overwrites grad_input.
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* grad_output, const T* weight, T* grad_input);

/// grad_weight += ..., grad_bias += ... (grad_bias may be null).
template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, const T* grad_output, const T* input, T* grad_weight,
                            T* grad_bias);

}  // namespace krnet::kernels::reference
