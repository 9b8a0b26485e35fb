// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "krnet/tensor.hpp"

namespace krnet::nn {

template <typename T>
struct LossResult {
  T value{};
  Tensor<T> grad;  // d value / d input, same shape as the input
};

/// Mean over the batch of -log softmax(logits)[label].
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels);

/// (1 / B) * sum over selected rows of ||pred_i - target_i||^2, where B is the
/// full batch size. An empty mask selects every row. No gradient is produced
/// for `target`.
template <typename T>
LossResult<T> batch_squared_error(const Tensor<T>& pred, const Tensor<T>& target,
                                  std::span<const std::uint8_t> row_mask = {});

/// Index of the largest logit per row.
template <typename T>
std::vector<std::size_t> argmax_rows(const Tensor<T>& logits);

}  // namespace krnet::nn
