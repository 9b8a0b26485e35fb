// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "krnet/nn/module.hpp"
#include "krnet/tensor.hpp"

namespace krnet::testing {

template <typename T>
Tensor<T> random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  nn::Rng rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<T> t(shape);
  for (auto& v : t.storage()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename A, typename B>
double max_abs_diff(const Tensor<A>& a, const Tensor<B>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

/// Central differences of `loss` w.r.t. every entry of `params`, compared
/// with the gradients already stored in Parameter::grad. The relative error
/// of one entry is |a - n| / max(|a| + |n|, floor).
inline GradCheck check_parameter_gradients(const std::vector<nn::Parameter<double>*>& params,
                                           const std::function<double()>& loss, double eps = 1e-6,
                                           double floor = 1e-6) {
  GradCheck out;
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double up = loss();
      p->value[i] = saved - eps;
      const double down = loss();
      p->value[i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = p->grad[i];
      const double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = p->name + "[" + std::to_string(i) + "] analytic=" + std::to_string(analytic) +
                    " numeric=" + std::to_string(numeric);
      }
    }
  }
  return out;
}

/// Same for an input tensor whose analytic gradient is `grad`.
inline GradCheck check_input_gradient(Tensor<double>& x, const Tensor<double>& grad,
                                      const std::function<double()>& loss, double eps = 1e-6,
                                      double floor = 1e-6) {
  GradCheck out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double up = loss();
    x[i] = saved - eps;
    const double down = loss();
    x[i] = saved;
    const double numeric = (up - down) / (2 * eps);
    const double rel = std::abs(grad[i] - numeric) / std::max(std::abs(grad[i]) + std::abs(numeric), floor);
    ++out.checked;
    if (rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst = "input[" + std::to_string(i) + "]";
    }
  }
  return out;
}

/// Weighted sum <w, y> as a scalar probe loss; returns the loss, and dL/dy = w.
inline double probe_loss(const Tensor<double>& y, const Tensor<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

}  // namespace krnet::testing
