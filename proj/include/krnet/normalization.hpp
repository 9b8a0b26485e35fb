// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "krnet/tensor.hpp"

namespace krnet {

/// Per-channel linear map of a feature corpus onto [0, 1]. A channel whose
/// max equals its min normalises to 0 and denormalises back to its min.
struct NormalizationStats {
  std::vector<float> min;
  std::vector<float> max;

  std::size_t channels() const { return min.size(); }
  /// max - min, or 0 for a degenerate channel.
  double scale(std::size_t channel) const;

  /// Stats over every sample and spatial position of `corpus` [N, C, ...].
  static NormalizationStats compute(const Tensor<float>& corpus);

  template <typename T>
  Tensor<T> normalize(const Tensor<T>& batch) const;
  template <typename T>
  Tensor<T> denormalize(const Tensor<T>& batch) const;
  /// Chain rule through denormalize: grad * scale(channel).
  template <typename T>
  Tensor<T> denormalize_grad(const Tensor<T>& grad) const;

  /// Row-major (min, max) pairs, the on-disk layout.
  std::vector<float> interleaved() const;
  static NormalizationStats from_interleaved(const std::vector<float>& pairs);
};

}  // namespace krnet
