// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "krnet/kernels/parallel.hpp"

namespace krnet::nn {

namespace kp = kernels::parallel;
using kernels::Transpose;

namespace {

void require_rank(const Shape& shape, std::size_t rank, const char* layer) {
  if (shape.size() != rank) {
    throw ValidationError(std::string(layer) + " expects a rank-" + std::to_string(rank) + " input, got " +
                          shape_to_string(shape));
  }
}

}  // namespace

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out, const std::string& name, Rng& rng)
    : weight_(name + ".weight", {out, in}), bias_(name + ".bias", {out}) {
  init_fan_in(weight_.value, in, rng);
}

template <typename T>
Tensor<T> Linear<T>::infer(const Tensor<T>& x) const {
  const std::size_t batch = x.rank() == 0 ? 0 : x.dim(0);
  const std::size_t in = in_features();
  const std::size_t out = out_features();
  if (batch > 0 && x.row_size() != in) {
    throw ValidationError("linear layer " + weight_.name + " expects " + std::to_string(in) + " inputs, got " +
                          shape_to_string(x.shape()));
  }
  Tensor<T> y({batch, out});
  kp::gemm(Transpose::kNo, Transpose::kYes, batch, out, in, T{1}, x.data(), weight_.value.data(), T{}, y.data());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out; ++o) y[b * out + o] += bias_.value[o];
  }
  return y;
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) {
  input_ = x;
  return infer(x);
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t batch = grad_out.dim(0);
  const std::size_t in = in_features();
  const std::size_t out = out_features();
  Tensor<T> grad_in(input_.shape());
  kp::gemm(Transpose::kNo, Transpose::kNo, batch, in, out, T{1}, grad_out.data(), weight_.value.data(), T{},
           grad_in.data());
  if (!weight_.frozen) {
    kp::gemm(Transpose::kYes, Transpose::kNo, out, in, batch, T{1}, grad_out.data(), input_.data(), T{1},
             weight_.grad.data());
  }
  if (!bias_.frozen) {
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < out; ++o) bias_.grad[o] += grad_out[b * out + o];
    }
  }
  return grad_in;
}

template <typename T>
void Linear<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

template <typename T>
void Linear<T>::grow_outputs(std::size_t extra, Rng& rng) {
  const std::size_t in = in_features();
  const std::size_t out = out_features();
  Tensor<T> fresh({extra, in});
  init_fan_in(fresh, in, rng);
  auto grow = [&](Parameter<T>& p, const Tensor<T>& appended, Shape shape) {
    std::vector<T> data = p.value.storage();
    data.insert(data.end(), appended.storage().begin(), appended.storage().end());
    p.value = Tensor<T>(shape, std::move(data));
    p.grad = Tensor<T>(shape);
  };
  grow(weight_, fresh, {out + extra, in});
  grow(bias_, Tensor<T>({extra}), {out + extra});
}

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
                  std::size_t pad, const std::string& name, Rng& rng, bool bias)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      has_bias_(bias),
      weight_(name + ".weight", {out_channels, in_channels, kernel, kernel}),
      bias_(name + ".bias", {bias ? out_channels : 0}) {
  init_fan_in(weight_.value, in_channels * kernel * kernel, rng);
}

template <typename T>
kernels::ConvGeometry Conv2d<T>::geometry(const Shape& s) const {
  require_rank(s, 4, "conv2d");
  if (s[1] != in_channels_) {
    throw ValidationError(weight_.name + ": expected " + std::to_string(in_channels_) + " channels, got " +
                          shape_to_string(s));
  }
  if (s[2] + 2 * pad_ < kernel_ || s[3] + 2 * pad_ < kernel_) {
    throw ValidationError(weight_.name + ": input " + shape_to_string(s) + " smaller than kernel");
  }
  kernels::ConvGeometry g;
  g.batch = s[0];
  g.in_channels = in_channels_;
  g.in_h = s[2];
  g.in_w = s[3];
  g.out_channels = out_channels_;
  g.kernel = kernel_;
  g.stride = stride_;
  g.pad = pad_;
  g.out_h = kernels::conv_out_extent(s[2], kernel_, stride_, pad_);
  g.out_w = kernels::conv_out_extent(s[3], kernel_, stride_, pad_);
  return g;
}

template <typename T>
Tensor<T> Conv2d<T>::infer(const Tensor<T>& x) const {
  const auto g = geometry(x.shape());
  Tensor<T> y({g.batch, g.out_channels, g.out_h, g.out_w});
  kp::conv2d_forward(g, x.data(), weight_.value.data(), has_bias_ ? bias_.value.data() : nullptr, y.data());
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  input_ = x;
  return infer(x);
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out) {
  const auto g = geometry(input_.shape());
  Tensor<T> grad_in(input_.shape());
  kp::conv2d_backward_input(g, grad_out.data(), weight_.value.data(), grad_in.data());
  if (!weight_.frozen) {
    kp::conv2d_backward_weight(g, grad_out.data(), input_.data(), weight_.grad.data(),
                               has_bias_ && !bias_.frozen ? bias_.grad.data() : nullptr);
  } else if (has_bias_ && !bias_.frozen) {
    const std::size_t plane = g.out_plane();
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t c = 0; c < g.out_channels; ++c) {
        const T* row = grad_out.data() + (n * g.out_channels + c) * plane;
        for (std::size_t q = 0; q < plane; ++q) bias_.grad[c] += row[q];
      }
    }
  }
  return grad_in;
}

template <typename T>
void Conv2d<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

// ---------------------------------------------------------------- ConvTranspose2d

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                                    std::size_t stride, std::size_t pad, std::size_t output_pad,
                                    const std::string& name, Rng& rng)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      output_pad_(output_pad),
      weight_(name + ".weight", {in_channels, out_channels, kernel, kernel}),
      bias_(name + ".bias", {out_channels}) {
  if (output_pad >= stride) throw ValidationError(name + ": output padding must be smaller than stride");
  init_fan_in(weight_.value, in_channels * kernel * kernel / (stride * stride), rng);
}

template <typename T>
kernels::ConvGeometry ConvTranspose2d<T>::geometry(const Shape& s) const {
  require_rank(s, 4, "conv_transpose2d");
  if (s[1] != in_channels_) {
    throw ValidationError(weight_.name + ": expected " + std::to_string(in_channels_) + " channels, got " +
                          shape_to_string(s));
  }
  kernels::ConvGeometry g;
  g.batch = s[0];
  g.in_channels = out_channels_;
  g.in_h = kernels::deconv_out_extent(s[2], kernel_, stride_, pad_, output_pad_);
  g.in_w = kernels::deconv_out_extent(s[3], kernel_, stride_, pad_, output_pad_);
  g.out_channels = in_channels_;
  g.out_h = s[2];
  g.out_w = s[3];
  g.kernel = kernel_;
  g.stride = stride_;
  g.pad = pad_;
  return g;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::infer(const Tensor<T>& x) const {
  const auto g = geometry(x.shape());
  Tensor<T> y({g.batch, out_channels_, g.in_h, g.in_w});
  kp::conv2d_backward_input(g, x.data(), weight_.value.data(), y.data());
  const std::size_t plane = g.in_plane();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t c = 0; c < out_channels_; ++c) {
      T* row = y.data() + (n * out_channels_ + c) * plane;
      for (std::size_t q = 0; q < plane; ++q) row[q] += bias_.value[c];
    }
  }
  return y;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::forward(const Tensor<T>& x) {
  input_ = x;
  return infer(x);
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::backward(const Tensor<T>& grad_out) {
  const auto g = geometry(input_.shape());
  Tensor<T> grad_in(input_.shape());
  kp::conv2d_forward(g, grad_out.data(), weight_.value.data(), static_cast<const T*>(nullptr), grad_in.data());
  if (!weight_.frozen) {
    kp::conv2d_backward_weight(g, input_.data(), grad_out.data(), weight_.grad.data(), static_cast<T*>(nullptr));
  }
  if (!bias_.frozen) {
    const std::size_t plane = g.in_plane();
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t c = 0; c < out_channels_; ++c) {
        const T* row = grad_out.data() + (n * out_channels_ + c) * plane;
        T sum{};
        for (std::size_t q = 0; q < plane; ++q) sum += row[q];
        bias_.grad[c] += sum;
      }
    }
  }
  return grad_in;
}

template <typename T>
void ConvTranspose2d<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------------- GroupNorm

template <typename T>
GroupNorm<T>::GroupNorm(std::size_t groups, std::size_t channels, const std::string& name, double eps)
    : groups_(groups), channels_(channels), eps_(eps), gamma_(name + ".gamma", {channels}), beta_(name + ".beta", {channels}) {
  if (groups == 0 || channels % groups != 0) {
    throw ValidationError(name + ": " + std::to_string(channels) + " channels are not divisible into " +
                          std::to_string(groups) + " groups");
  }
  gamma_.value.fill(T{1});
}

template <typename T>
Tensor<T> GroupNorm<T>::run(const Tensor<T>& x, Tensor<T>* xhat, std::vector<T>* inv_std) const {
  if (x.rank() < 2 || x.dim(1) != channels_) {
    throw ValidationError(gamma_.name + ": expected [B, " + std::to_string(channels_) + ", ...], got " +
                          shape_to_string(x.shape()));
  }
  const std::size_t batch = x.dim(0);
  const std::size_t spatial = batch == 0 ? 0 : x.row_size() / channels_;
  const std::size_t per_group = channels_ / groups_;
  const std::size_t group_elems = per_group * spatial;
  Tensor<T> y(x.shape());
  if (xhat) *xhat = Tensor<T>(x.shape());
  if (inv_std) inv_std->assign(batch * groups_, T{});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t g = 0; g < groups_; ++g) {
      const std::size_t base = (b * channels_ + g * per_group) * spatial;
      double mean = 0.0;
      for (std::size_t i = 0; i < group_elems; ++i) mean += x[base + i];
      mean /= static_cast<double>(group_elems);
      double var = 0.0;
      for (std::size_t i = 0; i < group_elems; ++i) {
        const double d = x[base + i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(group_elems);
      const double istd = 1.0 / std::sqrt(var + eps_);
      if (inv_std) (*inv_std)[b * groups_ + g] = static_cast<T>(istd);
      for (std::size_t c = 0; c < per_group; ++c) {
        const std::size_t ch = g * per_group + c;
        for (std::size_t s = 0; s < spatial; ++s) {
          const std::size_t idx = base + c * spatial + s;
          const T nh = static_cast<T>((x[idx] - mean) * istd);
          if (xhat) (*xhat)[idx] = nh;
          y[idx] = gamma_.value[ch] * nh + beta_.value[ch];
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> GroupNorm<T>::infer(const Tensor<T>& x) const {
  return run(x, nullptr, nullptr);
}

template <typename T>
Tensor<T> GroupNorm<T>::forward(const Tensor<T>& x) {
  return run(x, &xhat_, &inv_std_);
}

template <typename T>
Tensor<T> GroupNorm<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t batch = xhat_.dim(0);
  const std::size_t spatial = batch == 0 ? 0 : xhat_.row_size() / channels_;
  const std::size_t per_group = channels_ / groups_;
  const std::size_t group_elems = per_group * spatial;
  Tensor<T> grad_in(xhat_.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t g = 0; g < groups_; ++g) {
      const std::size_t base = (b * channels_ + g * per_group) * spatial;
      double sum_d = 0.0;
      double sum_dx = 0.0;
      for (std::size_t c = 0; c < per_group; ++c) {
        const std::size_t ch = g * per_group + c;
        for (std::size_t s = 0; s < spatial; ++s) {
          const std::size_t idx = base + c * spatial + s;
          const double d = static_cast<double>(grad_out[idx]) * gamma_.value[ch];
          sum_d += d;
          sum_dx += d * xhat_[idx];
          if (!gamma_.frozen) gamma_.grad[ch] += grad_out[idx] * xhat_[idx];
          if (!beta_.frozen) beta_.grad[ch] += grad_out[idx];
        }
      }
      const double mean_d = sum_d / static_cast<double>(group_elems);
      const double mean_dx = sum_dx / static_cast<double>(group_elems);
      const double istd = inv_std_[b * groups_ + g];
      for (std::size_t c = 0; c < per_group; ++c) {
        const std::size_t ch = g * per_group + c;
        for (std::size_t s = 0; s < spatial; ++s) {
          const std::size_t idx = base + c * spatial + s;
          const double d = static_cast<double>(grad_out[idx]) * gamma_.value[ch];
          grad_in[idx] = static_cast<T>(istd * (d - mean_d - xhat_[idx] * mean_dx));
        }
      }
    }
  }
  return grad_in;
}

template <typename T>
void GroupNorm<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

// ---------------------------------------------------------------- LeakyReLU

template <typename T>
Tensor<T> LeakyReLU<T>::infer(const Tensor<T>& x) const {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{} ? x[i] : slope_ * x[i];
  return y;
}

template <typename T>
Tensor<T> LeakyReLU<T>::forward(const Tensor<T>& x) {
  input_ = x;
  return infer(x);
}

template <typename T>
Tensor<T> LeakyReLU<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> grad_in(input_.shape());
  for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] = input_[i] > T{} ? grad_out[i] : slope_ * grad_out[i];
  return grad_in;
}

// ---------------------------------------------------------------- Reshape

template <typename T>
Tensor<T> Reshape<T>::infer(const Tensor<T>& x) const {
  Shape shape{x.rank() == 0 ? 0 : x.dim(0)};
  shape.insert(shape.end(), sample_shape_.begin(), sample_shape_.end());
  return x.reshaped(shape);
}

template <typename T>
Tensor<T> Reshape<T>::forward(const Tensor<T>& x) {
  input_shape_ = x.shape();
  return infer(x);
}

template <typename T>
Tensor<T> Reshape<T>::backward(const Tensor<T>& grad_out) {
  return grad_out.reshaped(input_shape_);
}

// ---------------------------------------------------------------- GlobalAvgPool

template <typename T>
Tensor<T> GlobalAvgPool<T>::infer(const Tensor<T>& x) const {
  require_rank(x.shape(), 4, "global_avg_pool");
  const std::size_t plane = x.dim(2) * x.dim(3);
  Tensor<T> y({x.dim(0), x.dim(1)});
  for (std::size_t i = 0; i < y.size(); ++i) {
    T sum{};
    for (std::size_t q = 0; q < plane; ++q) sum += x[i * plane + q];
    y[i] = sum / static_cast<T>(plane);
  }
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x) {
  input_shape_ = x.shape();
  return infer(x);
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> grad_in(input_shape_);
  const std::size_t plane = input_shape_[2] * input_shape_[3];
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const T g = grad_out[i] / static_cast<T>(plane);
    for (std::size_t q = 0; q < plane; ++q) grad_in[i * plane + q] = g;
  }
  return grad_in;
}

// ---------------------------------------------------------------- MaxPool2d

template <typename T>
Tensor<T> MaxPool2d<T>::run(const Tensor<T>& x, std::vector<std::size_t>* argmax) const {
  require_rank(x.shape(), 4, "max_pool2d");
  const std::size_t oh = kernels::conv_out_extent(x.dim(2), kernel_, stride_, pad_);
  const std::size_t ow = kernels::conv_out_extent(x.dim(3), kernel_, stride_, pad_);
  Tensor<T> y({x.dim(0), x.dim(1), oh, ow});
  if (argmax) argmax->assign(y.size(), 0);
  const std::size_t planes = x.dim(0) * x.dim(1);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t ky = 0; ky < kernel_; ++ky) {
          const long iy = static_cast<long>(oy * stride_ + ky) - static_cast<long>(pad_);
          if (iy < 0 || iy >= static_cast<long>(x.dim(2))) continue;
          for (std::size_t kx = 0; kx < kernel_; ++kx) {
            const long ix = static_cast<long>(ox * stride_ + kx) - static_cast<long>(pad_);
            if (ix < 0 || ix >= static_cast<long>(x.dim(3))) continue;
            const std::size_t idx = (p * x.dim(2) + static_cast<std::size_t>(iy)) * x.dim(3) + static_cast<std::size_t>(ix);
            if (x[idx] > best) {
              best = x[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t out_idx = (p * oh + oy) * ow + ox;
        y[out_idx] = best;
        if (argmax) (*argmax)[out_idx] = best_idx;
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> MaxPool2d<T>::infer(const Tensor<T>& x) const {
  return run(x, nullptr);
}

template <typename T>
Tensor<T> MaxPool2d<T>::forward(const Tensor<T>& x) {
  input_shape_ = x.shape();
  return run(x, &argmax_);
}

template <typename T>
Tensor<T> MaxPool2d<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> grad_in(input_shape_);
  for (std::size_t i = 0; i < grad_out.size(); ++i) grad_in[argmax_[i]] += grad_out[i];
  return grad_in;
}

// ---------------------------------------------------------------- Sequential

template <typename T>
Sequential<T>::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& layer : other.layers_) layers_.push_back(layer->clone());
}

template <typename T>
Sequential<T>& Sequential<T>::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    layers_ = std::move(copy.layers_);
  }
  return *this;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x) {
  Tensor<T> h = x;
  for (auto& layer : layers_) h = layer->forward(h);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::infer(const Tensor<T>& x) const {
  Tensor<T> h = x;
  for (const auto& layer : layers_) h = layer->infer(h);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
void Sequential<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  for (auto& layer : layers_) layer->collect_parameters(out);
}

#define KRNET_INSTANTIATE(T)         \
  template class Linear<T>;          \
  template class Conv2d<T>;          \
  template class ConvTranspose2d<T>; \
  template class GroupNorm<T>;       \
  template class LeakyReLU<T>;       \
  template class Reshape<T>;         \
  template class GlobalAvgPool<T>;   \
  template class MaxPool2d<T>;       \
  template class Sequential<T>;

KRNET_INSTANTIATE(float)
KRNET_INSTANTIATE(double)
#undef KRNET_INSTANTIATE

}  // namespace krnet::nn
