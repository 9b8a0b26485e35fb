// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// F1 outputs cached per (split, F1 weights). Each entry is a raw float32
// block [N, c, h, w] under features/, described in features/manifest.json.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "krnet/corpus.hpp"
#include "krnet/experiment/datasets.hpp"
#include "krnet/kril/backbone.hpp"

namespace krnet::experiment {

class FeatureCache {
 public:
  /// An empty directory keeps entries in memory only.
  explicit FeatureCache(std::filesystem::path dir = {});

  /// F1(images) for `key`. A second call with the same key and F1 weights
  /// returns the stored block without running F1.
  FeatureCorpus get_or_compute(const std::string& key, const kril::SplitBackbone& backbone, const ImageSet& images);

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  std::string entry_name(const std::string& key, std::uint64_t f1_hash) const;
  void write_manifest() const;

  std::filesystem::path dir_;
  std::map<std::string, FeatureCorpus> memory_;
  std::map<std::string, nlohmann::ordered_json> manifest_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// Fraction of exactly-zero entries.
double zero_fraction(const Tensor<float>& features);

}  // namespace krnet::experiment
