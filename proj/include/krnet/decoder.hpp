// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>

#include "json.hpp"
#include "krnet/corpus.hpp"
#include "krnet/nn/blocks.hpp"

namespace krnet {

/// Hyper-parameters of the feature decoder shared by KRNet and the AE baseline.
struct DecoderConfig {
  std::size_t latent_dim = 0;  // decoder input width, 2H
  std::size_t d0 = 0;          // first FC width
  std::size_t c0 = 0;          // channels before the deconvolution
  std::size_t c1 = 0;          // channels after the deconvolution
  std::size_t deconv_stride = 1;
  FeatureShape target;
  std::size_t conv_kernel = 3;
  std::size_t deconv_kernel = 5;
  std::size_t gn_groups = 2;
  double leaky_slope = 1e-4;

  std::size_t h0() const { return target.height / deconv_stride; }
  std::size_t w0() const { return target.width / deconv_stride; }
  /// Second FC width, c0 * h0 * w0.
  std::size_t d1() const { return c0 * h0() * w0(); }
  std::size_t deconv_pad() const { return deconv_kernel / 2; }
  std::size_t deconv_output_pad() const { return deconv_stride - 1; }

  /// Throws ValidationError naming the first violated constraint.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static DecoderConfig from_json(const nlohmann::json& j);

  /// d0=1024, d1=512x8x8, c1=64, s_d=1 for 64x8x8 features, H=512.
  static DecoderConfig cifar100();
  /// d0=1536, d1=1024x7x7, c1=256, s_d=2 for 256x14x14 features, H=512.
  static DecoderConfig imagenet_subset();
  /// H=4, d0=8, d1=4x2x2, c1=2, target 2x2x2. Used for gradient checks.
  static DecoderConfig tiny();
  /// Desk-scale recorder preset: 16x4x4 features, H=64.
  static DecoderConfig desk();
};

/// Output shape of every decoder stage, derived without building weights.
struct DecoderShapeTrace {
  Shape after_fc;       // [d1]
  Shape initial_map;    // [c0, h0, w0]
  Shape after_deconv;   // [c1, h, w]
  Shape output;         // [c, h, w]
};
DecoderShapeTrace trace_decoder_shapes(const DecoderConfig& config);

/// Trainable scalars of a FeatureDecoder built from `config`, counted without allocating it.
std::size_t decoder_parameter_count(const DecoderConfig& config);

/// FC(d0) -> FC(d1) -> reshape (c0, h0, w0) -> 4 residual blocks ->
/// deconvolution module -> 2 residual blocks -> conv module -> 3x3 conv.
/// The final conv has no activation.
template <typename T>
class FeatureDecoder final : public nn::Module<T> {
 public:
  FeatureDecoder(const DecoderConfig& config, nn::Rng& rng, const std::string& name = "decoder");

  Tensor<T> forward(const Tensor<T>& e) override;
  Tensor<T> infer(const Tensor<T>& e) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  void collect_parameters(std::vector<nn::Parameter<T>*>& out) override { net_.collect_parameters(out); }
  std::unique_ptr<nn::Module<T>> clone() const override { return std::make_unique<FeatureDecoder>(*this); }

  const DecoderConfig& config() const { return config_; }
  /// Stage `i` of the pipeline; blocks are stages 3..6 and 8..9.
  nn::Module<T>& stage(std::size_t i) { return net_.at(i); }
  std::size_t num_stages() const { return net_.size(); }

 private:
  void check_input(const Tensor<T>& e) const;

  DecoderConfig config_;
  nn::Sequential<T> net_;
};

}  // namespace krnet
