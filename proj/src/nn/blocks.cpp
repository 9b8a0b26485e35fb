// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/nn/blocks.hpp"

namespace krnet::nn {

template <typename T>
ResidualBlock<T>::ResidualBlock(std::size_t in_channels, std::size_t out_channels, std::size_t stride,
                                double slope, std::size_t gn_groups, const std::string& name, Rng& rng)
    : conv1_(in_channels, out_channels, 3, stride, 1, name + ".conv1", rng),
      gn1_(gn_groups, out_channels, name + ".gn1"),
      act1_(slope),
      conv2_(out_channels, out_channels, 3, 1, 1, name + ".conv2", rng),
      gn2_(gn_groups, out_channels, name + ".gn2"),
      out_act_(slope) {
  if (in_channels != out_channels || stride != 1) {
    proj_.emplace(in_channels, out_channels, 1, stride, 0, name + ".proj", rng, false);
    proj_gn_.emplace(gn_groups, out_channels, name + ".proj_gn");
  }
}

template <typename T>
Tensor<T> ResidualBlock<T>::infer(const Tensor<T>& x) const {
  Tensor<T> h = gn2_.infer(conv2_.infer(act1_.infer(gn1_.infer(conv1_.infer(x)))));
  const Tensor<T> skip = proj_ ? proj_gn_->infer(proj_->infer(x)) : x;
  for (std::size_t i = 0; i < h.size(); ++i) h[i] += skip[i];
  return out_act_.infer(h);
}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x) {
  Tensor<T> h = gn2_.forward(conv2_.forward(act1_.forward(gn1_.forward(conv1_.forward(x)))));
  const Tensor<T> skip = proj_ ? proj_gn_->forward(proj_->forward(x)) : x;
  for (std::size_t i = 0; i < h.size(); ++i) h[i] += skip[i];
  return out_act_.forward(h);
}

template <typename T>
Tensor<T> ResidualBlock<T>::backward(const Tensor<T>& grad_out) {
  const Tensor<T> g = out_act_.backward(grad_out);
  Tensor<T> grad_in = conv1_.backward(gn1_.backward(act1_.backward(conv2_.backward(gn2_.backward(g)))));
  const Tensor<T> skip = proj_ ? proj_->backward(proj_gn_->backward(g)) : g;
  for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] += skip[i];
  return grad_in;
}

template <typename T>
std::vector<Parameter<T>*> ResidualBlock<T>::branch_parameters() {
  std::vector<Parameter<T>*> out;
  conv1_.collect_parameters(out);
  gn1_.collect_parameters(out);
  conv2_.collect_parameters(out);
  gn2_.collect_parameters(out);
  return out;
}

template <typename T>
void ResidualBlock<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  for (auto* p : branch_parameters()) out.push_back(p);
  if (proj_) {
    proj_->collect_parameters(out);
    proj_gn_->collect_parameters(out);
  }
}

template <typename T>
std::unique_ptr<Sequential<T>> make_fc_module(std::size_t in, std::size_t out, std::size_t gn_groups, double slope,
                                              const std::string& name, Rng& rng) {
  auto seq = std::make_unique<Sequential<T>>();
  seq->template emplace<Linear<T>>(in, out, name + ".fc", rng);
  seq->template emplace<GroupNorm<T>>(gn_groups, out, name + ".gn");
  seq->template emplace<LeakyReLU<T>>(slope);
  return seq;
}

template <typename T>
std::unique_ptr<Sequential<T>> make_conv_module(std::size_t in, std::size_t out, std::size_t kernel,
                                                std::size_t stride, std::size_t pad, std::size_t gn_groups,
                                                double slope, const std::string& name, Rng& rng) {
  auto seq = std::make_unique<Sequential<T>>();
  seq->template emplace<Conv2d<T>>(in, out, kernel, stride, pad, name + ".conv", rng);
  seq->template emplace<GroupNorm<T>>(gn_groups, out, name + ".gn");
  seq->template emplace<LeakyReLU<T>>(slope);
  return seq;
}

template <typename T>
std::unique_ptr<Sequential<T>> make_deconv_module(std::size_t in, std::size_t out, std::size_t kernel,
                                                  std::size_t stride, std::size_t pad, std::size_t output_pad,
                                                  std::size_t gn_groups, double slope, const std::string& name,
                                                  Rng& rng) {
  auto seq = std::make_unique<Sequential<T>>();
  seq->template emplace<ConvTranspose2d<T>>(in, out, kernel, stride, pad, output_pad, name + ".deconv", rng);
  seq->template emplace<GroupNorm<T>>(gn_groups, out, name + ".gn");
  seq->template emplace<LeakyReLU<T>>(slope);
  return seq;
}

#define KRNET_INSTANTIATE(T)                                                                                     \
  template class ResidualBlock<T>;                                                                               \
  template std::unique_ptr<Sequential<T>> make_fc_module<T>(std::size_t, std::size_t, std::size_t, double,       \
                                                            const std::string&, Rng&);                           \
  template std::unique_ptr<Sequential<T>> make_conv_module<T>(std::size_t, std::size_t, std::size_t, std::size_t, \
                                                              std::size_t, std::size_t, double, const std::string&, \
                                                              Rng&);                                             \
  template std::unique_ptr<Sequential<T>> make_deconv_module<T>(std::size_t, std::size_t, std::size_t,           \
                                                                std::size_t, std::size_t, std::size_t, std::size_t, \
                                                                double, const std::string&, Rng&);

KRNET_INSTANTIATE(float)
KRNET_INSTANTIATE(double)
#undef KRNET_INSTANTIATE

}  // namespace krnet::nn
