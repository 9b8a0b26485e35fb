// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/nn/loss.hpp"

#include <algorithm>
#include <cmath>

namespace krnet::nn {

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw ValidationError("cross-entropy expects [B, C] logits and B labels, got " + shape_to_string(logits.shape()) +
                          " and " + std::to_string(labels.size()));
  }
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  LossResult<T> out{T{}, Tensor<T>(logits.shape())};
  if (batch == 0) return out;
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] >= classes) throw ValidationError("label " + std::to_string(labels[b]) + " out of range");
    const T* row = logits.data() + b * classes;
    const double mx = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(row[c] - mx);
    const double log_denom = std::log(denom);
    total += -(row[labels[b]] - mx - log_denom);
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(row[c] - mx - log_denom);
      out.grad[b * classes + c] = static_cast<T>((p - (c == labels[b] ? 1.0 : 0.0)) / static_cast<double>(batch));
    }
  }
  out.value = static_cast<T>(total / static_cast<double>(batch));
  return out;
}

template <typename T>
LossResult<T> batch_squared_error(const Tensor<T>& pred, const Tensor<T>& target,
                                  std::span<const std::uint8_t> row_mask) {
  if (pred.shape() != target.shape()) {
    throw ValidationError("squared error shape mismatch: " + shape_to_string(pred.shape()) + " vs " +
                          shape_to_string(target.shape()));
  }
  LossResult<T> out{T{}, Tensor<T>(pred.shape())};
  if (pred.rank() == 0 || pred.dim(0) == 0) return out;
  const std::size_t batch = pred.dim(0);
  if (!row_mask.empty() && row_mask.size() != batch) throw ValidationError("row mask length does not match batch");
  const std::size_t row = pred.row_size();
  const double inv_b = 1.0 / static_cast<double>(batch);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (!row_mask.empty() && !row_mask[b]) continue;
    for (std::size_t i = b * row; i < (b + 1) * row; ++i) {
      const double d = static_cast<double>(pred[i]) - target[i];
      total += d * d;
      out.grad[i] = static_cast<T>(2.0 * d * inv_b);
    }
  }
  out.value = static_cast<T>(total * inv_b);
  return out;
}

template <typename T>
std::vector<std::size_t> argmax_rows(const Tensor<T>& logits) {
  std::vector<std::size_t> out(logits.dim(0));
  const std::size_t classes = logits.dim(1);
  for (std::size_t b = 0; b < out.size(); ++b) {
    const T* row = logits.data() + b * classes;
    out[b] = static_cast<std::size_t>(std::max_element(row, row + classes) - row);
  }
  return out;
}

#define KRNET_INSTANTIATE(T)                                                                         \
  template LossResult<T> softmax_cross_entropy<T>(const Tensor<T>&, std::span<const std::size_t>);   \
  template LossResult<T> batch_squared_error<T>(const Tensor<T>&, const Tensor<T>&,                  \
                                                std::span<const std::uint8_t>);                      \
  template std::vector<std::size_t> argmax_rows<T>(const Tensor<T>&);

KRNET_INSTANTIATE(float)
KRNET_INSTANTIATE(double)
#undef KRNET_INSTANTIATE

}  // namespace krnet::nn
