// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "krnet/grouping.hpp"
#include "krnet/tensor.hpp"

namespace krnet {

struct FeatureShape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t numel() const { return channels * height * width; }
  std::size_t plane() const { return height * width; }
  Shape batch_shape(std::size_t n) const { return {n, channels, height, width}; }
  std::string to_string() const;
  bool operator==(const FeatureShape&) const = default;
};

/// Feature maps with their sample IDs and class labels, aligned by row.
struct FeatureCorpus {
  Tensor<float> features;  // [N, c, h, w]
  std::vector<SampleId> ids;
  std::vector<ClassLabel> labels;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  FeatureShape feature_shape() const;
  /// Throws ValidationError on misaligned rows or duplicate IDs.
  void validate() const;
  FeatureCorpus subset(std::span<const std::size_t> rows) const;
  /// Rows whose label is in `classes`.
  FeatureCorpus filter_classes(std::span<const ClassLabel> classes) const;
  std::vector<LabeledSample> labeled_samples() const;
};

/// Concatenate two corpora; rejects shared sample IDs.
FeatureCorpus merge_corpora(const FeatureCorpus& a, const FeatureCorpus& b);

}  // namespace krnet
