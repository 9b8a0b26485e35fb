// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>

#include "krnet/krnet_model.hpp"
#include "krnet/nn/layers.hpp"
#include "krnet/training.hpp"
#include "test_util.hpp"

namespace krnet::testing {

/// Frozen conv -> leaky ReLU -> GAP -> linear head for 2-channel maps.
inline nn::Sequential<double> tiny_head(std::uint64_t seed) {
  nn::Rng rng(seed);
  nn::Sequential<double> head;
  head.emplace<nn::Conv2d<double>>(2, 3, 3, 1, 1, "head.conv", rng);
  head.emplace<nn::LeakyReLU<double>>(0.1);
  head.emplace<nn::GlobalAvgPool<double>>();
  head.emplace<nn::Linear<double>>(3, 2, "head.fc", rng);
  head.set_frozen(true);
  return head;
}

struct KrGradientResult {
  GradCheck parameters;  // through embed and decode
  GradCheck prediction;  // loss w.r.t. the decoder output
};

/// Finite-difference check of the recorder loss on the tiny configuration in
/// double precision, with per-channel stats that are far from the identity.
inline KrGradientResult kr_gradient_check(double gamma, std::uint64_t seed = 3) {
  KRNetModel<double> model(build_group_index({{0, 4}, {1, 3}}, 4), DecoderConfig::tiny(), seed);
  nn::Rng rng(seed + 1);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  for (auto* p : model.parameters()) {
    for (auto& v : p->value.storage()) v += jitter(rng);
  }
  NormalizationStats stats;
  stats.min = {-0.5f, 0.25f};
  stats.max = {1.5f, 0.75f};
  auto head = tiny_head(seed + 2);
  const std::vector<SampleId> ids{0, 2, 4, 6};
  const Tensor<double> target = random_tensor<double>({4, 2, 2, 2}, seed + 3, 0.0, 1.0);

  KrGradientResult out;
  model.zero_grad();
  const auto pred = model.forward(ids);
  const auto loss = loss_kr<double>(pred, target, &head, stats, gamma);
  model.backward(loss.grad);
  // The loss is O(10) here, so a step of 1e-4 keeps rounding noise well below
  // the smallest gradients checked.
  constexpr double kStep = 1e-4;
  out.parameters = check_parameter_gradients(
      model.parameters(),
      [&] { return loss_kr<double>(model.predict_normalized(ids), target, &head, stats, gamma).total; }, kStep);

  Tensor<double> x = pred;
  const auto at_x = loss_kr<double>(x, target, &head, stats, gamma);
  out.prediction =
      check_input_gradient(x, at_x.grad, [&] { return loss_kr<double>(x, target, &head, stats, gamma).total; }, kStep);
  return out;
}

}  // namespace krnet::testing
