// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "krnet/experiment/datasets.hpp"
#include "krnet/kril/kril.hpp"

namespace krnet::experiment {

enum class Scale { kDesk, kPaper };
std::string to_string(Scale scale);
Scale parse_scale(const std::string& s);

struct DatasetSpec {
  /// "synthetic-images", "cifar100" or "imagenet-subset".
  std::string name = "synthetic-images";
  std::filesystem::path root;
  std::size_t image_size = 16;
  /// ImageNet subset: classes drawn from the full class list with subset_seed.
  std::size_t subset_classes = 100;
  std::uint64_t subset_seed = 1993;
  /// 0 keeps every image.
  std::size_t max_per_class = 0;
  SyntheticImageSpec synthetic;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static DatasetSpec from_json(const nlohmann::json& j);
};

/// Recorder-only runs on a generated feature corpus.
struct CorpusSpec {
  SyntheticFeatureSpec features;
  RecorderTrainConfig train;
  /// AE latent width; 0 means 2H.
  std::size_t ae_latent_dim = 0;

  nlohmann::ordered_json to_json() const;
  static CorpusSpec from_json(const nlohmann::json& j);
};

/// Inputs of the storage comparison table.
struct StorageSpec {
  std::size_t group_size = 512;
  FeatureShape feature_shape{256, 14, 14};
  std::size_t ae_latent_dim = 1024;
  /// Decoder whose float32 weights count towards the compression ratio.
  DecoderConfig decoder = DecoderConfig::imagenet_subset();

  nlohmann::ordered_json to_json() const;
  static StorageSpec from_json(const nlohmann::json& j);
};

/// Every field is explicit in the JSON form; nothing falls back to a default
/// when a resolved config is read back.
struct ExperimentConfig {
  Scale scale = Scale::kDesk;
  DatasetSpec dataset;
  kril::BackboneSpec backbone;
  /// Number of incremental tasks after the base task.
  std::size_t tasks = 2;
  kril::KrilConfig kril;
  CorpusSpec corpus;
  StorageSpec storage;
  std::uint64_t seed = 0;
  std::filesystem::path output = "runs/latest";

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);

  static ExperimentConfig desk();
  /// CIFAR-100, ResNet-32 split after block 11, five increments.
  static ExperimentConfig paper();
};

ExperimentConfig preset(Scale scale);

/// Decoder preset adapted to a new target shape (used when the split index moves).
DecoderConfig decoder_for_features(const DecoderConfig& base, const FeatureShape& shape);

/// Loads a config file, or the scale preset when `path` is empty, then applies
/// KRNET_DATA_ROOT to the dataset root when it is set.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& path, Scale scale);

/// The ImageNet subset manifest is written under `work_dir` on first use.
ImageDataset ingest_dataset(const DatasetSpec& spec, const std::filesystem::path& work_dir);

}  // namespace krnet::experiment
