// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/report/storage.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "krnet/error.hpp"
#include "krnet/grouping.hpp"

namespace krnet::report {

nlohmann::ordered_json StorageReport::to_json() const {
  nlohmann::ordered_json j;
  j["num_classes"] = num_classes;
  j["num_samples"] = num_samples;
  j["feature_shape"] = {feature_shape.channels, feature_shape.height, feature_shape.width};
  j["group_size"] = group_size;
  j["num_groups"] = num_groups;
  j["ae_latent_dim"] = ae_latent_dim;
  j["bytes_raw"] = bytes_raw;
  j["bytes_ae_latent"] = bytes_ae_latent;
  j["bytes_krnet_latent"] = bytes_krnet_latent;
  j["bytes_model_weights"] = bytes_model_weights;
  j["compression_ratio_overall"] = compression_ratio_overall;
  return j;
}

StorageReport storage_report(const std::map<ClassLabel, std::size_t>& class_counts, std::size_t group_size,
                             const FeatureShape& feature_shape, std::uint64_t model_weight_bytes,
                             std::size_t ae_latent_dim) {
  if (feature_shape.numel() == 0) throw ValidationError("feature shape must be non-empty");
  StorageReport r;
  r.num_groups = count_groups(class_counts, group_size);
  r.num_classes = class_counts.size();
  for (const auto& [label, n] : class_counts) r.num_samples += n;
  r.feature_shape = feature_shape;
  r.group_size = group_size;
  r.ae_latent_dim = ae_latent_dim == 0 ? 2 * group_size : ae_latent_dim;
  constexpr std::uint64_t kFloat = sizeof(float);
  r.bytes_raw = r.num_samples * feature_shape.numel() * kFloat;
  r.bytes_ae_latent = r.num_samples * r.ae_latent_dim * kFloat;
  r.bytes_krnet_latent = 2ULL * r.num_groups * group_size * kFloat;
  r.bytes_model_weights = model_weight_bytes;
  const std::uint64_t kept = r.bytes_krnet_latent + r.bytes_model_weights;
  r.compression_ratio_overall = kept == 0 ? 0.0 : static_cast<double>(r.bytes_raw) / static_cast<double>(kept);
  return r;
}

std::map<ClassLabel, std::size_t> even_class_counts(std::size_t classes, std::uint64_t total) {
  if (classes == 0) throw ValidationError("need at least one class");
  std::map<ClassLabel, std::size_t> out;
  const std::uint64_t base = total / classes;
  const std::uint64_t extra = total % classes;
  for (std::size_t c = 0; c < classes; ++c) out[static_cast<ClassLabel>(c)] = base + (c < extra ? 1 : 0);
  return out;
}

std::string format_binary_size(std::uint64_t bytes) {
  constexpr double kMiB = 1024.0 * 1024.0;
  constexpr double kGiB = kMiB * 1024.0;
  char buf[64];
  if (static_cast<double>(bytes) >= kGiB) {
    std::snprintf(buf, sizeof(buf), "%.2f GB", static_cast<double>(bytes) / kGiB);
  } else {
    std::snprintf(buf, sizeof(buf), "%.2f MB", static_cast<double>(bytes) / kMiB);
  }
  return buf;
}

std::vector<StorageRow> imagenet_storage_rows() {
  return {{50, 64817}, {100, 129395}, {150, 194217}, {200, 255224}, {250, 319811}};
}

std::vector<StorageReport> storage_table(const std::vector<StorageRow>& rows, std::size_t group_size,
                                         const FeatureShape& feature_shape, std::uint64_t model_weight_bytes,
                                         std::size_t ae_latent_dim) {
  std::vector<StorageReport> out;
  for (const auto& row : rows) {
    out.push_back(storage_report(even_class_counts(row.classes, row.samples), group_size, feature_shape,
                                 model_weight_bytes, ae_latent_dim));
  }
  return out;
}

std::string storage_markdown(const std::vector<StorageReport>& reports) {
  std::ostringstream s;
  s << "| # Classes | # Samples | Feature Storage | AE Storage | KRNet Storage |\n";
  s << "|---:|---:|---:|---:|---:|\n";
  for (const auto& r : reports) {
    std::string samples = std::to_string(r.num_samples);
    for (int i = static_cast<int>(samples.size()) - 3; i > 0; i -= 3) samples.insert(static_cast<std::size_t>(i), ",");
    s << "| " << r.num_classes << " | " << samples << " | " << format_binary_size(r.bytes_raw) << " | "
      << format_binary_size(r.bytes_ae_latent) << " | " << format_binary_size(r.bytes_krnet_latent) << " |\n";
  }
  return s.str();
}

void write_storage_csv(const std::vector<StorageReport>& reports, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << "classes,samples,groups,bytes_raw,bytes_ae_latent,bytes_krnet_latent,bytes_model_weights,"
         "compression_ratio,raw,ae,krnet\n";
  for (const auto& r : reports) {
    char ratio[32];
    std::snprintf(ratio, sizeof(ratio), "%.4f", r.compression_ratio_overall);
    out << r.num_classes << ',' << r.num_samples << ',' << r.num_groups << ',' << r.bytes_raw << ','
        << r.bytes_ae_latent << ',' << r.bytes_krnet_latent << ',' << r.bytes_model_weights << ',' << ratio << ','
        << format_binary_size(r.bytes_raw) << ',' << format_binary_size(r.bytes_ae_latent) << ','
        << format_binary_size(r.bytes_krnet_latent) << '\n';
  }
}

}  // namespace krnet::report
