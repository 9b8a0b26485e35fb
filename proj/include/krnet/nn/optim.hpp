// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "krnet/nn/module.hpp"

namespace krnet::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// L2 penalty folded into the gradient. Recorders must train with 0.
  double weight_decay = 0.0;
};

/// Bias-corrected Adam. Frozen parameters are skipped.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, AdamOptions options);

  void step(double lr);
  void zero_grad();
  std::size_t steps() const { return steps_; }
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<Parameter<T>*> params_;
  AdamOptions options_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::size_t steps_ = 0;
};

template <typename T>
struct ParamGroup {
  std::vector<Parameter<T>*> params;
  double lr_scale = 1.0;
};

/// Momentum SGD with coupled weight decay and per-group learning-rate scales.
template <typename T>
class Sgd {
 public:
  Sgd(std::vector<ParamGroup<T>> groups, double momentum, double weight_decay);

  void step(double lr);
  void zero_grad();

 private:
  std::vector<ParamGroup<T>> groups_;
  double momentum_;
  double weight_decay_;
  std::vector<std::vector<std::vector<T>>> velocity_;
};

}  // namespace krnet::nn
