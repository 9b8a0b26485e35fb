// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>

#include "krnet/nn/layers.hpp"

namespace krnet::nn {

/// conv3x3 -> GN -> act -> conv3x3 -> GN, plus a skip path, then act.
/// The skip is the identity unless the block changes channels or stride,
/// in which case it is a strided 1x1 conv followed by GN.
template <typename T>
class ResidualBlock final : public Module<T> {
 public:
  ResidualBlock(std::size_t in_channels, std::size_t out_channels, std::size_t stride, double slope,
                std::size_t gn_groups, const std::string& name, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<ResidualBlock>(*this); }

  /// Parameters of the conv/GN branch only (excludes the projection skip).
  std::vector<Parameter<T>*> branch_parameters();
  bool has_projection() const { return proj_.has_value(); }

 private:
  Conv2d<T> conv1_;
  GroupNorm<T> gn1_;
  LeakyReLU<T> act1_;
  Conv2d<T> conv2_;
  GroupNorm<T> gn2_;
  std::optional<Conv2d<T>> proj_;
  std::optional<GroupNorm<T>> proj_gn_;
  LeakyReLU<T> out_act_;
};

/// Linear -> GN -> LeakyReLU.
template <typename T>
std::unique_ptr<Sequential<T>> make_fc_module(std::size_t in, std::size_t out, std::size_t gn_groups, double slope,
                                              const std::string& name, Rng& rng);

/// Conv(k, stride, pad) -> GN -> LeakyReLU.
template <typename T>
std::unique_ptr<Sequential<T>> make_conv_module(std::size_t in, std::size_t out, std::size_t kernel,
                                                std::size_t stride, std::size_t pad, std::size_t gn_groups,
                                                double slope, const std::string& name, Rng& rng);

/// ConvTranspose(k, stride, pad, output_pad) -> GN -> LeakyReLU.
template <typename T>
std::unique_ptr<Sequential<T>> make_deconv_module(std::size_t in, std::size_t out, std::size_t kernel,
                                                  std::size_t stride, std::size_t pad, std::size_t output_pad,
                                                  std::size_t gn_groups, double slope, const std::string& name,
                                                  Rng& rng);

}  // namespace krnet::nn
