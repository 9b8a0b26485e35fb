// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Autoencoder baseline: a mirrored encoder produces one 2H-dimensional code
// per sample, and a decoder with KRNet's architecture maps codes back.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "krnet/decoder.hpp"
#include "krnet/normalization.hpp"

namespace krnet {

/// One stored code per sample, rows aligned with `ids`.
struct LatentBank {
  Tensor<float> codes;  // [N, 2H]
  std::vector<SampleId> ids;

  std::size_t size() const { return ids.size(); }
  std::size_t dim() const { return codes.rank() == 2 ? codes.dim(1) : 0; }
  /// N * dim * 4.
  std::uint64_t storage_bytes() const { return static_cast<std::uint64_t>(codes.size()) * sizeof(float); }
};

/// Raw float32 rows at `path`, plus `path`.json holding {N, dim, sample_ids}.
void save_latent_bank(const LatentBank& bank, const std::filesystem::path& path);
LatentBank load_latent_bank(const std::filesystem::path& path);

template <typename T>
class AEModel {
 public:
  AEModel(DecoderConfig config, std::uint64_t seed);

  const DecoderConfig& config() const { return config_; }
  std::size_t code_dim() const { return config_.latent_dim; }
  const NormalizationStats& norm_stats() const { return stats_; }
  void set_norm_stats(NormalizationStats stats);

  /// Normalised feature maps [B, c, h, w] -> codes [B, 2H].
  Tensor<T> encode(const Tensor<T>& normalized) const;
  Tensor<T> decode(const Tensor<T>& codes) const;

  /// Training pass decode(encode(x)); caches for backward().
  Tensor<T> forward(const Tensor<T>& normalized);
  void backward(const Tensor<T>& grad_out);

  /// Encode every row of a raw-scale corpus.
  LatentBank build_latent_bank(const Tensor<float>& raw_features, const std::vector<SampleId>& ids) const;
  /// Denormalised reconstructions of stored codes.
  Tensor<T> replay(const LatentBank& bank) const;

  std::vector<nn::Parameter<T>*> parameters();
  std::vector<const nn::Parameter<T>*> parameters() const;
  std::size_t weight_parameter_count() const;
  nn::Sequential<T>& encoder() { return encoder_; }
  FeatureDecoder<T>& decoder() { return decoder_; }

 private:
  void check_features(const Tensor<T>& x) const;

  DecoderConfig config_;
  nn::Rng rng_;
  nn::Sequential<T> encoder_;
  FeatureDecoder<T> decoder_;
  NormalizationStats stats_;
};

/// Archive entries: decoder_config.json, norm_stats, weights/<parameter name>.
void save_ae(const AEModel<float>& model, const std::filesystem::path& path);
AEModel<float> load_ae(const std::filesystem::path& path);

}  // namespace krnet
