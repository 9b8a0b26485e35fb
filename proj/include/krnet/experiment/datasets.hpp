// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "krnet/corpus.hpp"
#include "krnet/nn/module.hpp"

namespace krnet::experiment {

/// Clustered, low-rank, rectified feature maps scaled into [0, 1]. Stands in
/// for F1 outputs when a recorder is exercised without a backbone.
struct SyntheticFeatureSpec {
  std::size_t samples = 2048;
  std::size_t classes = 8;
  FeatureShape shape{16, 4, 4};
  std::size_t rank = 8;
  double class_spread = 0.6;
  double sample_spread = 0.35;
  double noise = 0.05;
  /// Fraction of exact zeros after rectification.
  double zero_fraction = 0.21;
  std::uint64_t seed = 7;
};

/// IDs 0..N-1; classes are assigned round-robin so counts differ by at most one.
FeatureCorpus make_synthetic_features(const SyntheticFeatureSpec& spec);

/// NCHW float images in [0, 1] with aligned IDs and labels.
struct ImageSet {
  Tensor<float> images;
  std::vector<SampleId> ids;
  std::vector<ClassLabel> labels;

  std::size_t size() const { return ids.size(); }
  ImageSet subset(std::span<const std::size_t> rows) const;
  ImageSet filter_classes(std::span<const ClassLabel> classes) const;
};

struct ImageDataset {
  std::string name;
  std::size_t num_classes = 0;
  ImageSet train;
  ImageSet test;
  std::size_t image_size = 0;  // square side fed to the backbone
};

/// Class prototypes built from a few smooth random blobs per channel, plus
/// per-sample amplitude jitter, translation and pixel noise.
struct SyntheticImageSpec {
  std::size_t classes = 10;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 60;
  std::size_t channels = 3;
  std::size_t size = 16;
  double noise = 0.25;
  std::size_t max_shift = 2;
  std::uint64_t seed = 11;
};
ImageDataset make_synthetic_images(const SyntheticImageSpec& spec);

/// CIFAR-100 binary release (train.bin / test.bin with fine labels).
/// Train IDs are 0..49999, test IDs start at 1000000.
ImageDataset load_cifar100(const std::filesystem::path& root);

/// One line per image: "<relative path> <class index>".
struct ManifestEntry {
  std::string path;
  ClassLabel label = 0;
};

/// Select `num_classes` class directories of an ImageNet-style tree
/// (root/train/<wnid>/*.JPEG, root/val/<wnid>/*.JPEG) with a seeded shuffle
/// of the sorted class list, and write train/val manifests into `out_dir`.
void write_imagenet_subset_manifest(const std::filesystem::path& root, std::size_t num_classes, std::uint64_t seed,
                                    const std::filesystem::path& out_dir);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Decode JPEG, resize the shorter side to `resize`, center crop `crop`.
Tensor<float> load_jpeg_center_crop(const std::filesystem::path& path, std::size_t resize, std::size_t crop);
/// ImageNet-subset loader over manifests; images are resized to 8/7 of
/// `image_size` on the shorter side and center-cropped.
/// `max_per_class` = 0 keeps every listed image.
ImageDataset load_imagenet_subset(const std::filesystem::path& root, const std::filesystem::path& manifest_dir,
                                  std::size_t image_size = 224, std::size_t max_per_class = 0);

/// Training-time augmentation, in place: zero-pad by `pad`, random crop back
/// to the original size, random horizontal flip.
void augment_pad_crop_flip(Tensor<float>& batch, std::size_t pad, nn::Rng& rng);

}  // namespace krnet::experiment
