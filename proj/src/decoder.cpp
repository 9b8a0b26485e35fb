// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/decoder.hpp"

#include "krnet/kernels/conv_geometry.hpp"

namespace krnet {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError("decoder config: " + message);
}

}  // namespace

void DecoderConfig::validate() const {
  require(latent_dim > 0 && d0 > 0 && c0 > 0 && c1 > 0, "latent_dim, d0, c0, c1 must be positive");
  require(target.numel() > 0, "target shape must be non-empty");
  require(deconv_stride == 1 || deconv_stride == 2, "deconvolution stride must be 1 or 2");
  require(target.height % deconv_stride == 0 && target.width % deconv_stride == 0,
          "target spatial size must be divisible by the deconvolution stride");
  require(conv_kernel % 2 == 1 && deconv_kernel % 2 == 1, "kernel sizes must be odd");
  require(gn_groups > 0, "gn_groups must be positive");
  for (auto [name, width] : {std::pair{"latent_dim", latent_dim}, {"d0", d0}, {"c0", c0}, {"c1", c1},
                             {"target channels", target.channels}}) {
    require(width % gn_groups == 0, std::string(name) + "=" + std::to_string(width) + " not divisible by " +
                                        std::to_string(gn_groups) + " GN groups");
  }
  require(d1() % gn_groups == 0, "d1 not divisible by GN groups");
  require(kernels::deconv_out_extent(h0(), deconv_kernel, deconv_stride, deconv_pad(), deconv_output_pad()) ==
                  target.height &&
              kernels::deconv_out_extent(w0(), deconv_kernel, deconv_stride, deconv_pad(), deconv_output_pad()) ==
                  target.width,
          "deconvolution does not reach the target spatial size");
}

nlohmann::ordered_json DecoderConfig::to_json() const {
  nlohmann::ordered_json j;
  j["latent_dim"] = latent_dim;
  j["d0"] = d0;
  j["d1"] = d1();
  j["c0"] = c0;
  j["c1"] = c1;
  j["deconv_stride"] = deconv_stride;
  j["target_shape"] = {target.channels, target.height, target.width};
  j["conv_kernel"] = conv_kernel;
  j["deconv_kernel"] = deconv_kernel;
  j["gn_groups"] = gn_groups;
  j["leaky_slope"] = leaky_slope;
  return j;
}

DecoderConfig DecoderConfig::from_json(const nlohmann::json& j) {
  DecoderConfig c;
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.d0 = j.at("d0").get<std::size_t>();
  c.c0 = j.at("c0").get<std::size_t>();
  c.c1 = j.at("c1").get<std::size_t>();
  c.deconv_stride = j.at("deconv_stride").get<std::size_t>();
  const auto shape = j.at("target_shape").get<std::vector<std::size_t>>();
  if (shape.size() != 3) throw ValidationError("decoder config: target_shape must have 3 entries");
  c.target = {shape[0], shape[1], shape[2]};
  c.conv_kernel = j.value("conv_kernel", std::size_t{3});
  c.deconv_kernel = j.value("deconv_kernel", std::size_t{5});
  c.gn_groups = j.value("gn_groups", std::size_t{2});
  c.leaky_slope = j.value("leaky_slope", 1e-4);
  if (j.contains("d1") && j.at("d1").get<std::size_t>() != c.d1()) {
    throw ValidationError("decoder config: d1 must equal c0*h0*w0 = " + std::to_string(c.d1()));
  }
  c.validate();
  return c;
}

DecoderConfig DecoderConfig::cifar100() {
  DecoderConfig c;
  c.latent_dim = 1024;
  c.d0 = 1024;
  c.c0 = 512;
  c.c1 = 64;
  c.deconv_stride = 1;
  c.target = {64, 8, 8};
  return c;
}

DecoderConfig DecoderConfig::imagenet_subset() {
  DecoderConfig c;
  c.latent_dim = 1024;
  c.d0 = 1536;
  c.c0 = 1024;
  c.c1 = 256;
  c.deconv_stride = 2;
  c.target = {256, 14, 14};
  return c;
}

DecoderConfig DecoderConfig::tiny() {
  DecoderConfig c;
  c.latent_dim = 8;
  c.d0 = 8;
  c.c0 = 4;
  c.c1 = 2;
  c.deconv_stride = 1;
  c.target = {2, 2, 2};
  return c;
}

DecoderConfig DecoderConfig::desk() {
  DecoderConfig c;
  c.latent_dim = 128;
  c.d0 = 128;
  c.c0 = 32;
  c.c1 = 16;
  c.deconv_stride = 1;
  c.target = {16, 4, 4};
  return c;
}

DecoderShapeTrace trace_decoder_shapes(const DecoderConfig& config) {
  config.validate();
  DecoderShapeTrace t;
  t.after_fc = {config.d1()};
  t.initial_map = {config.c0, config.h0(), config.w0()};
  t.after_deconv = {config.c1,
                    kernels::deconv_out_extent(config.h0(), config.deconv_kernel, config.deconv_stride,
                                               config.deconv_pad(), config.deconv_output_pad()),
                    kernels::deconv_out_extent(config.w0(), config.deconv_kernel, config.deconv_stride,
                                               config.deconv_pad(), config.deconv_output_pad())};
  t.output = {config.target.channels, t.after_deconv[1], t.after_deconv[2]};
  return t;
}

std::size_t decoder_parameter_count(const DecoderConfig& config) {
  config.validate();
  const auto& c = config;
  const auto fc = [](std::size_t in, std::size_t out) { return in * out + 3 * out; };
  const auto conv = [](std::size_t in, std::size_t out, std::size_t k) { return out * in * k * k + 3 * out; };
  const auto block = [&](std::size_t ch) { return 2 * conv(ch, ch, 3); };
  const std::size_t k = c.conv_kernel;
  return fc(c.latent_dim, c.d0) + fc(c.d0, c.d1()) + 4 * block(c.c0) + conv(c.c0, c.c1, c.deconv_kernel) +
         2 * block(c.c1) + conv(c.c1, c.target.channels, k) +
         c.target.channels * c.target.channels * k * k + c.target.channels;
}

template <typename T>
FeatureDecoder<T>::FeatureDecoder(const DecoderConfig& config, nn::Rng& rng, const std::string& name)
    : config_(config) {
  config_.validate();
  const auto& c = config_;
  const std::size_t g = c.gn_groups;
  const double slope = c.leaky_slope;
  const std::size_t pad = c.conv_kernel / 2;
  net_.add(nn::make_fc_module<T>(c.latent_dim, c.d0, g, slope, name + ".fc0", rng));
  net_.add(nn::make_fc_module<T>(c.d0, c.d1(), g, slope, name + ".fc1", rng));
  net_.template emplace<nn::Reshape<T>>(Shape{c.c0, c.h0(), c.w0()});
  for (int i = 0; i < 4; ++i) {
    net_.template emplace<nn::ResidualBlock<T>>(c.c0, c.c0, 1, slope, g, name + ".pre" + std::to_string(i), rng);
  }
  net_.add(nn::make_deconv_module<T>(c.c0, c.c1, c.deconv_kernel, c.deconv_stride, c.deconv_pad(),
                                     c.deconv_output_pad(), g, slope, name + ".up", rng));
  for (int i = 0; i < 2; ++i) {
    net_.template emplace<nn::ResidualBlock<T>>(c.c1, c.c1, 1, slope, g, name + ".post" + std::to_string(i), rng);
  }
  net_.add(nn::make_conv_module<T>(c.c1, c.target.channels, c.conv_kernel, 1, pad, g, slope, name + ".out", rng));
  net_.template emplace<nn::Conv2d<T>>(c.target.channels, c.target.channels, c.conv_kernel, 1, pad,
                                       name + ".head", rng);
}

template <typename T>
void FeatureDecoder<T>::check_input(const Tensor<T>& e) const {
  if (e.rank() != 2 || e.dim(1) != config_.latent_dim) {
    throw ValidationError("decoder expects [B, " + std::to_string(config_.latent_dim) + "] embeddings, got " +
                          shape_to_string(e.shape()));
  }
}

template <typename T>
Tensor<T> FeatureDecoder<T>::forward(const Tensor<T>& e) {
  check_input(e);
  return net_.forward(e);
}

template <typename T>
Tensor<T> FeatureDecoder<T>::infer(const Tensor<T>& e) const {
  check_input(e);
  if (e.dim(0) == 0) return Tensor<T>(config_.target.batch_shape(0));
  return net_.infer(e);
}

template <typename T>
Tensor<T> FeatureDecoder<T>::backward(const Tensor<T>& grad_out) {
  return net_.backward(grad_out);
}

template class FeatureDecoder<float>;
template class FeatureDecoder<double>;

}  // namespace krnet
