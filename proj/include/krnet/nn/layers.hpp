// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "krnet/kernels/conv_geometry.hpp"
#include "krnet/nn/module.hpp"

namespace krnet::nn {

/// y = x W^T + b, x: [B, in] (trailing dims are flattened), W: [out, in].
template <typename T>
class Linear final : public Module<T> {
 public:
  Linear(std::size_t in, std::size_t out, const std::string& name, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<Linear>(*this); }

  std::size_t in_features() const { return weight_.value.dim(1); }
  std::size_t out_features() const { return weight_.value.dim(0); }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

  /// Append `extra` freshly initialised output rows, keeping existing rows.
  void grow_outputs(std::size_t extra, Rng& rng);

 private:
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor<T> input_;
};

template <typename T>
class Conv2d final : public Module<T> {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride, std::size_t pad,
         const std::string& name, Rng& rng, bool bias = true);

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<Conv2d>(*this); }

  kernels::ConvGeometry geometry(const Shape& input_shape) const;
  Parameter<T>& weight() { return weight_; }

 private:
  std::size_t in_channels_, out_channels_, kernel_, stride_, pad_;
  bool has_bias_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor<T> input_;
};

/// Transposed convolution; weight layout [in, out, k, k].
template <typename T>
class ConvTranspose2d final : public Module<T> {
 public:
  ConvTranspose2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
                  std::size_t pad, std::size_t output_pad, const std::string& name, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<ConvTranspose2d>(*this); }

  /// Geometry of the equivalent forward convolution (our output is its input).
  kernels::ConvGeometry geometry(const Shape& input_shape) const;

 private:
  std::size_t in_channels_, out_channels_, kernel_, stride_, pad_, output_pad_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor<T> input_;
};

/// Group normalisation over (channels-in-group x spatial) with per-channel
/// affine. Rank-2 inputs [B, C] are treated as C channels of spatial size 1.
template <typename T>
class GroupNorm final : public Module<T> {
 public:
  GroupNorm(std::size_t groups, std::size_t channels, const std::string& name, double eps = 1e-5);

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<GroupNorm>(*this); }

  Parameter<T>& gamma() { return gamma_; }
  Parameter<T>& beta() { return beta_; }

 private:
  Tensor<T> run(const Tensor<T>& x, Tensor<T>* xhat, std::vector<T>* inv_std) const;

  std::size_t groups_, channels_;
  double eps_;
  Parameter<T> gamma_;
  Parameter<T> beta_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

/// max(x, 0) + slope * min(x, 0). slope = 0 gives ReLU.
template <typename T>
class LeakyReLU final : public Module<T> {
 public:
  explicit LeakyReLU(double slope) : slope_(static_cast<T>(slope)) {}

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<LeakyReLU>(*this); }

 private:
  T slope_;
  Tensor<T> input_;
};

/// Reshape every sample to `sample_shape`, keeping the batch axis.
template <typename T>
class Reshape final : public Module<T> {
 public:
  explicit Reshape(Shape sample_shape) : sample_shape_(std::move(sample_shape)) {}

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<Reshape>(*this); }

 private:
  Shape sample_shape_;
  Shape input_shape_;
};

/// [B, C, H, W] -> [B, C]
template <typename T>
class GlobalAvgPool final : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }

 private:
  Shape input_shape_;
};

template <typename T>
class MaxPool2d final : public Module<T> {
 public:
  MaxPool2d(std::size_t kernel, std::size_t stride, std::size_t pad) : kernel_(kernel), stride_(stride), pad_(pad) {}

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<MaxPool2d>(*this); }

 private:
  Tensor<T> run(const Tensor<T>& x, std::vector<std::size_t>* argmax) const;

  std::size_t kernel_, stride_, pad_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

template <typename T>
class Sequential final : public Module<T> {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  Sequential& add(std::unique_ptr<Module<T>> layer) {
    layers_.push_back(std::move(layer));
    return *this;
  }
  template <typename Layer, typename... Args>
  Layer& emplace(Args&&... args) {
    auto layer = std::make_unique<Layer>(std::forward<Args>(args)...);
    Layer& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<Sequential>(*this); }

  std::size_t size() const { return layers_.size(); }
  Module<T>& at(std::size_t i) { return *layers_.at(i); }
  const Module<T>& at(std::size_t i) const { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Module<T>>> layers_;
};

}  // namespace krnet::nn
