// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Residual classification backbones cut into a frozen feature extractor F1
// and a task learner F2 (feature part plus a growing linear classifier).
// Group normalisation stands in for batch normalisation throughout.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "krnet/corpus.hpp"
#include "krnet/nn/blocks.hpp"

namespace krnet::kril {

struct BlockPlan {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t stride = 1;
};

struct BackboneSpec {
  /// "resnet32" (CIFAR, 32x32 input), "resnet18" (224x224 input) or "desk"
  /// (16x16 input, five blocks).
  std::string arch = "desk";
  /// Number of building blocks kept in F1 (the stem always belongs to F1).
  std::size_t split_index = 3;
  std::size_t image_channels = 3;
  std::size_t image_size = 16;
  std::size_t gn_groups = 2;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static BackboneSpec from_json(const nlohmann::json& j);

  static BackboneSpec resnet32_cifar(std::size_t split_index = 11);
  static BackboneSpec resnet18(std::size_t split_index = 6);
  static BackboneSpec desk(std::size_t split_index = 3);
};

/// Residual blocks of the architecture, in order.
std::vector<BlockPlan> block_plan(const BackboneSpec& spec);
/// Shape of F1's output for one image.
FeatureShape split_feature_shape(const BackboneSpec& spec);

class SplitBackbone {
 public:
  SplitBackbone(const BackboneSpec& spec, std::size_t num_classes, std::uint64_t seed);

  const BackboneSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  FeatureShape feature_shape() const { return feature_shape_; }
  /// Weighted layers on the main path (stem, two per block, classifier).
  std::size_t f1_layer_count() const { return f1_layers_; }
  std::size_t f2_layer_count() const { return f2_layers_; }
  /// Width of the F2 feature vector fed to the classifier.
  std::size_t embedding_dim() const { return classifier_.in_features(); }
  std::size_t num_classes() const { return classifier_.out_features(); }

  nn::Sequential<float>& f1() { return f1_; }
  const nn::Sequential<float>& f1() const { return f1_; }
  /// F2 without its classifier.
  nn::Sequential<float>& f2_features() { return f2_features_; }
  const nn::Sequential<float>& f2_features() const { return f2_features_; }
  nn::Linear<float>& classifier() { return classifier_; }
  const nn::Linear<float>& classifier() const { return classifier_; }

  /// F1 over images in chunks, without caching.
  Tensor<float> extract(const Tensor<float>& images) const;
  /// classifier(F2~(features)) in chunks, without caching.
  Tensor<float> logits(const Tensor<float>& features) const;
  /// Append classifier rows for `extra` new classes.
  void grow_classes(std::size_t extra) { classifier_.grow_outputs(extra, rng_); }

 private:
  BackboneSpec spec_;
  FeatureShape feature_shape_;
  std::uint64_t seed_ = 0;
  nn::Rng rng_;
  std::size_t f1_layers_ = 0;
  std::size_t f2_layers_ = 0;
  nn::Sequential<float> f1_;
  nn::Sequential<float> f2_features_;
  nn::Linear<float> classifier_;
};

/// Whole network (F1, F2 and classifier) with its spec and seed.
void save_backbone(const SplitBackbone& model, const std::filesystem::path& path);
SplitBackbone load_backbone(const std::filesystem::path& path);

}  // namespace krnet::kril
