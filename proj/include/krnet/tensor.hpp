// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "krnet/error.hpp"

namespace krnet {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape);

/// Dense row-major tensor. Image-like data is laid out NCHW.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{})
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
      throw ValidationError("tensor data size " + std::to_string(data_.size()) +
                            " does not match shape " + shape_to_string(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Elements per leading-axis slice (per sample for batched tensors).
  std::size_t row_size() const { return shape_.empty() || shape_[0] == 0 ? 0 : data_.size() / shape_[0]; }
  std::span<T> row(std::size_t i) { return {data_.data() + i * row_size(), row_size()}; }
  std::span<const T> row(std::size_t i) const { return {data_.data() + i * row_size(), row_size()}; }

  void reshape(Shape shape) {
    if (shape_numel(shape) != data_.size()) {
      throw ValidationError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    }
    shape_ = std::move(shape);
  }
  Tensor reshaped(Shape shape) const {
    Tensor out = *this;
    out.reshape(std::move(shape));
    return out;
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// Gather rows (leading-axis slices) of `src` in the given order.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& src, std::span<const std::size_t> rows) {
  Shape shape = src.shape();
  if (shape.empty()) throw ValidationError("gather_rows on a rank-0 tensor");
  shape[0] = rows.size();
  Tensor<T> out(shape);
  const std::size_t stride = shape_numel(Shape(src.shape().begin() + 1, src.shape().end()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= src.dim(0)) throw ValidationError("gather_rows index out of range");
    std::copy_n(src.data() + rows[i] * stride, stride, out.data() + i * stride);
  }
  return out;
}

/// Concatenate along the leading axis. Trailing dimensions must agree.
template <typename T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.empty() && a.rank() <= 1) return b;
  if (b.empty() && b.rank() <= 1) return a;
  if (a.rank() != b.rank() || !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1)) {
    throw ValidationError("concat_rows shape mismatch: " + shape_to_string(a.shape()) + " vs " +
                          shape_to_string(b.shape()));
  }
  Shape shape = a.shape();
  shape[0] += b.dim(0);
  std::vector<T> data;
  data.reserve(a.size() + b.size());
  data.insert(data.end(), a.storage().begin(), a.storage().end());
  data.insert(data.end(), b.storage().begin(), b.storage().end());
  return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace krnet
