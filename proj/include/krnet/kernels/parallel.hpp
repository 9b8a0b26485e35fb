// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// OpenMP kernels used by every layer. Convolutions are lowered to
// im2col + blocked GEMM over chunks of the batch; each thread owns its
// scratch buffers. Weight-gradient partials are reduced in thread order so
// results do not depend on scheduling.
//
// Signatures and semantics match krnet/kernels/reference.hpp exactly.

#include "krnet/kernels/conv_geometry.hpp"

namespace krnet::kernels::parallel {

template <typename T>
void gemm(Transpose trans_a, Transpose trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
          const T* b, T beta, T* c);

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* input, const T* weight, const T* bias, T* output);

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* grad_output, const T* weight, T* grad_input);

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, const T* grad_output, const T* input, T* grad_weight,
                            T* grad_bias);

/// Number of OpenMP threads the kernels will use (1 when built without OpenMP).
int max_threads();

}  // namespace krnet::kernels::parallel
