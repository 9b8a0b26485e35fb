// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/normalization.hpp"

#include <algorithm>
#include <limits>

namespace krnet {

namespace {

std::size_t channel_plane(const Shape& shape, std::size_t channels) {
  if (shape.size() < 2 || shape[1] != channels) {
    throw ValidationError("normalization stats have " + std::to_string(channels) + " channels but batch is " +
                          shape_to_string(shape));
  }
  std::size_t plane = 1;
  for (std::size_t i = 2; i < shape.size(); ++i) plane *= shape[i];
  return plane;
}

}  // namespace

double NormalizationStats::scale(std::size_t channel) const {
  const double s = static_cast<double>(max[channel]) - static_cast<double>(min[channel]);
  return s > 0.0 ? s : 0.0;
}

NormalizationStats NormalizationStats::compute(const Tensor<float>& corpus) {
  if (corpus.rank() < 2 || corpus.dim(0) == 0) throw ValidationError("cannot compute stats of an empty corpus");
  const std::size_t channels = corpus.dim(1);
  const std::size_t plane = corpus.row_size() / channels;
  NormalizationStats stats;
  stats.min.assign(channels, std::numeric_limits<float>::infinity());
  stats.max.assign(channels, -std::numeric_limits<float>::infinity());
  for (std::size_t n = 0; n < corpus.dim(0); ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const float* p = corpus.data() + (n * channels + c) * plane;
      const auto [lo, hi] = std::minmax_element(p, p + plane);
      stats.min[c] = std::min(stats.min[c], *lo);
      stats.max[c] = std::max(stats.max[c], *hi);
    }
  }
  return stats;
}

template <typename T>
Tensor<T> NormalizationStats::normalize(const Tensor<T>& batch) const {
  const std::size_t plane = channel_plane(batch.shape(), channels());
  Tensor<T> out(batch.shape());
  const std::size_t n = batch.rank() ? batch.dim(0) : 0;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t c = 0; c < channels(); ++c) {
      const double s = scale(c);
      const std::size_t base = (b * channels() + c) * plane;
      for (std::size_t q = 0; q < plane; ++q) {
        out[base + q] = s > 0.0 ? static_cast<T>((batch[base + q] - static_cast<double>(min[c])) / s) : T{};
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> NormalizationStats::denormalize(const Tensor<T>& batch) const {
  const std::size_t plane = channel_plane(batch.shape(), channels());
  Tensor<T> out(batch.shape());
  const std::size_t n = batch.rank() ? batch.dim(0) : 0;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t c = 0; c < channels(); ++c) {
      const double s = scale(c);
      const std::size_t base = (b * channels() + c) * plane;
      for (std::size_t q = 0; q < plane; ++q) out[base + q] = static_cast<T>(batch[base + q] * s + min[c]);
    }
  }
  return out;
}

template <typename T>
Tensor<T> NormalizationStats::denormalize_grad(const Tensor<T>& grad) const {
  const std::size_t plane = channel_plane(grad.shape(), channels());
  Tensor<T> out(grad.shape());
  const std::size_t n = grad.rank() ? grad.dim(0) : 0;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t c = 0; c < channels(); ++c) {
      const T s = static_cast<T>(scale(c));
      const std::size_t base = (b * channels() + c) * plane;
      for (std::size_t q = 0; q < plane; ++q) out[base + q] = grad[base + q] * s;
    }
  }
  return out;
}

std::vector<float> NormalizationStats::interleaved() const {
  std::vector<float> out;
  for (std::size_t c = 0; c < channels(); ++c) {
    out.push_back(min[c]);
    out.push_back(max[c]);
  }
  return out;
}

NormalizationStats NormalizationStats::from_interleaved(const std::vector<float>& pairs) {
  if (pairs.size() % 2) throw ValidationError("normalization block must hold (min, max) pairs");
  NormalizationStats stats;
  for (std::size_t i = 0; i < pairs.size(); i += 2) {
    if (pairs[i + 1] < pairs[i]) throw ValidationError("normalization pair with max < min");
    stats.min.push_back(pairs[i]);
    stats.max.push_back(pairs[i + 1]);
  }
  return stats;
}

template Tensor<float> NormalizationStats::normalize(const Tensor<float>&) const;
template Tensor<double> NormalizationStats::normalize(const Tensor<double>&) const;
template Tensor<float> NormalizationStats::denormalize(const Tensor<float>&) const;
template Tensor<double> NormalizationStats::denormalize(const Tensor<double>&) const;
template Tensor<float> NormalizationStats::denormalize_grad(const Tensor<float>&) const;
template Tensor<double> NormalizationStats::denormalize_grad(const Tensor<double>&) const;

}  // namespace krnet
