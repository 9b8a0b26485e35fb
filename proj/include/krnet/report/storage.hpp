// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "krnet/corpus.hpp"
#include "json.hpp"

namespace krnet::report {

/// Float32 storage of one recorded population. All byte counts are exact.
struct StorageReport {
  std::size_t num_classes = 0;
  std::uint64_t num_samples = 0;
  FeatureShape feature_shape;
  std::size_t group_size = 0;
  std::size_t num_groups = 0;
  std::size_t ae_latent_dim = 0;
  std::uint64_t bytes_raw = 0;
  std::uint64_t bytes_ae_latent = 0;
  std::uint64_t bytes_krnet_latent = 0;
  std::uint64_t bytes_model_weights = 0;
  /// bytes_raw / (bytes_krnet_latent + bytes_model_weights).
  double compression_ratio_overall = 0.0;

  nlohmann::ordered_json to_json() const;
};

/// `ae_latent_dim` defaults to 2H, the width of a KRNet embedding.
StorageReport storage_report(const std::map<ClassLabel, std::size_t>& class_counts, std::size_t group_size,
                             const FeatureShape& feature_shape, std::uint64_t model_weight_bytes,
                             std::size_t ae_latent_dim = 0);

/// Splits `total` over `classes` as evenly as possible; earlier classes take the remainder.
std::map<ClassLabel, std::size_t> even_class_counts(std::size_t classes, std::uint64_t total);

/// Two decimals in MB (2^20 bytes), or GB (2^30) from 1 GB upwards.
std::string format_binary_size(std::uint64_t bytes);

struct StorageRow {
  std::size_t classes = 0;
  std::uint64_t samples = 0;
};

/// The five ImageNet populations of the storage comparison.
std::vector<StorageRow> imagenet_storage_rows();

/// One report per row, with evenly distributed per-class counts.
std::vector<StorageReport> storage_table(const std::vector<StorageRow>& rows, std::size_t group_size,
                                         const FeatureShape& feature_shape, std::uint64_t model_weight_bytes,
                                         std::size_t ae_latent_dim);

std::string storage_markdown(const std::vector<StorageReport>& reports);
/// Columns: classes,samples,groups,bytes_raw,bytes_ae_latent,bytes_krnet_latent,bytes_model_weights,
/// compression_ratio,raw,ae,krnet
void write_storage_csv(const std::vector<StorageReport>& reports, const std::filesystem::path& path);

}  // namespace krnet::report
