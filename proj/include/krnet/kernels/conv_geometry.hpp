// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

namespace krnet::kernels {

enum class Transpose { kNo, kYes };

/// Geometry of a square-kernel 2-D convolution, input -> output.
/// A transposed convolution reuses the geometry of the convolution it inverts.
struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  std::size_t out_channels = 1;
  std::size_t out_h = 1;
  std::size_t out_w = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t in_plane() const { return in_h * in_w; }
  std::size_t out_plane() const { return out_h * out_w; }
  std::size_t patch_size() const { return in_channels * kernel * kernel; }
  std::size_t weight_size() const { return out_channels * patch_size(); }
};

/// Output spatial extent of a convolution along one axis.
constexpr std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

/// Output spatial extent of a transposed convolution along one axis.
constexpr std::size_t deconv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad,
                                        std::size_t output_pad) {
  return (in - 1) * stride + kernel + output_pad - 2 * pad;
}

}  // namespace krnet::kernels
