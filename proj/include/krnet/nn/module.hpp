// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "krnet/tensor.hpp"

namespace krnet::nn {

using Rng = std::mt19937_64;

/// A learnable tensor and its accumulated gradient. Frozen parameters still
/// pass gradients through to their inputs but never accumulate their own.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Shape shape) : name(std::move(n)), value(shape), grad(shape) {}
};

/// Layer interface. `forward` caches what `backward` needs; `infer` is the
/// same computation without caching, so it is safe for concurrent callers.
/// `backward` returns the gradient w.r.t. the last `forward` input and adds
/// parameter gradients into Parameter::grad.
template <typename T>
class Module {
 public:
  virtual ~Module() = default;

  virtual Tensor<T> forward(const Tensor<T>& x) = 0;
  virtual Tensor<T> infer(const Tensor<T>& x) const = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual void collect_parameters(std::vector<Parameter<T>*>& out) { (void)out; }
  virtual std::unique_ptr<Module<T>> clone() const = 0;

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    collect_parameters(out);
    return out;
  }
  std::vector<const Parameter<T>*> parameters() const {
    auto params = const_cast<Module*>(this)->parameters();
    return {params.begin(), params.end()};
  }
  void zero_grad() {
    for (auto* p : parameters()) p->grad.fill(T{});
  }
  void set_frozen(bool frozen) {
    for (auto* p : parameters()) p->frozen = frozen;
  }
  /// True when every parameter is frozen (vacuously true for parameter-free modules).
  bool is_frozen() const {
    for (const auto* p : parameters()) {
      if (!p->frozen) return false;
    }
    return true;
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->value.size();
    return n;
  }
};

/// FNV-1a over the raw bytes of every parameter value, in collection order.
template <typename T>
std::uint64_t weight_hash(const Module<T>& module) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto* p : module.parameters()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    for (std::size_t i = 0; i < p->value.size() * sizeof(T); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

/// He-normal initialisation with standard deviation sqrt(2 / fan_in).
template <typename T>
void init_fan_in(Tensor<T>& w, std::size_t fan_in, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(std::max<std::size_t>(1, fan_in))));
  for (auto& v : w.storage()) v = static_cast<T>(dist(rng));
}

}  // namespace krnet::nn
