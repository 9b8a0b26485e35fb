// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/nn/optim.hpp"

#include <cmath>

namespace krnet::nn {

template <typename T>
Adam<T>::Adam(std::vector<Parameter<T>*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto* p : params_) {
    m_.emplace_back(p->value.size(), T{});
    v_.emplace_back(p->value.size(), T{});
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const T step_size = static_cast<T>(lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T wd = static_cast<T>(options_.weight_decay);
  const T eps = static_cast<T>(options_.eps);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter<T>& p = *params_[k];
    if (p.frozen) continue;
    T* w = p.value.data();
    const T* g = p.grad.data();
    T* m = m_[k].data();
    T* v = v_[k].data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const T gi = g[i] + wd * w[i];
      m[i] = static_cast<T>(b1) * m[i] + static_cast<T>(1.0 - b1) * gi;
      v[i] = static_cast<T>(b2) * v[i] + static_cast<T>(1.0 - b2) * gi * gi;
      w[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto* p : params_) p->grad.fill(T{});
}

template <typename T>
Sgd<T>::Sgd(std::vector<ParamGroup<T>> groups, double momentum, double weight_decay)
    : groups_(std::move(groups)), momentum_(momentum), weight_decay_(weight_decay) {
  for (const auto& group : groups_) {
    auto& bufs = velocity_.emplace_back();
    for (const auto* p : group.params) bufs.emplace_back(p->value.size(), T{});
  }
}

template <typename T>
void Sgd<T>::step(double lr) {
  const T mu = static_cast<T>(momentum_);
  const T wd = static_cast<T>(weight_decay_);
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const T group_lr = static_cast<T>(lr * groups_[gi].lr_scale);
    for (std::size_t k = 0; k < groups_[gi].params.size(); ++k) {
      Parameter<T>& p = *groups_[gi].params[k];
      if (p.frozen) continue;
      T* w = p.value.data();
      const T* g = p.grad.data();
      T* buf = velocity_[gi][k].data();
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        buf[i] = mu * buf[i] + g[i] + wd * w[i];
        w[i] -= group_lr * buf[i];
      }
    }
  }
}

template <typename T>
void Sgd<T>::zero_grad() {
  for (auto& group : groups_) {
    for (auto* p : group.params) p->grad.fill(T{});
  }
}

template class Adam<float>;
template class Adam<double>;
template class Sgd<float>;
template class Sgd<double>;

}  // namespace krnet::nn
