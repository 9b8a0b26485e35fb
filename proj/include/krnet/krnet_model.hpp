// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// KRNet: maps a sample ID to its feature map through a batched ID embedding
// (one static and one shared dynamic vector per group) and a feature decoder.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "krnet/decoder.hpp"
#include "krnet/grouping.hpp"
#include "krnet/normalization.hpp"

namespace krnet {

/// 2M learnable H-dimensional vectors plus the two FC modules that lift the
/// group vector and the permuted dynamic vector before concatenation.
template <typename T>
class EmbeddingBank {
 public:
  EmbeddingBank(std::size_t num_groups, std::size_t group_size, std::size_t gn_groups, double slope, nn::Rng& rng);

  std::size_t num_groups() const { return static_.value.dim(0); }
  std::size_t group_size() const { return static_.value.dim(1); }

  /// e = concat(FC_s(v_s[m]), FC_d(A_n v_d[m])) for every (m, n) in the batch.
  Tensor<T> forward(std::span<const SampleSlot> slots);
  Tensor<T> infer(std::span<const SampleSlot> slots) const;
  void backward(const Tensor<T>& grad_e);

  /// Pre-FC inputs (v_s[m], A_n v_d[m]) for each slot, each [B, H].
  std::pair<Tensor<T>, Tensor<T>> raw_inputs(std::span<const SampleSlot> slots) const;

  void collect_parameters(std::vector<nn::Parameter<T>*>& out);
  nn::Parameter<T>& static_vectors() { return static_; }
  nn::Parameter<T>& dynamic_vectors() { return dynamic_; }

 private:
  Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) const;

  nn::Parameter<T> static_;
  nn::Parameter<T> dynamic_;
  nn::Sequential<T> fc_static_;
  nn::Sequential<T> fc_dynamic_;
  std::vector<SampleSlot> cached_slots_;
};

template <typename T>
class KRNetModel {
 public:
  /// Requires config.latent_dim == 2H. Embedding vectors ~ N(0, 0.02^2).
  KRNetModel(GroupIndex index, DecoderConfig config, std::uint64_t seed);

  const GroupIndex& group_index() const { return index_; }
  const DecoderConfig& config() const { return config_; }
  std::size_t group_size() const { return index_.group_size(); }
  const NormalizationStats& norm_stats() const { return stats_; }
  void set_norm_stats(NormalizationStats stats);

  /// Validates every slot against the group index.
  Tensor<T> embed(std::span<const SampleSlot> slots) const;
  Tensor<T> decode(const Tensor<T>& embeddings) const;
  /// decode(embed(ids)) in normalised space.
  Tensor<T> predict_normalized(std::span<const SampleId> ids) const;
  /// Denormalised feature maps for the given sample IDs.
  Tensor<T> replay(std::span<const SampleId> ids) const;
  /// Replay every stored sample, in group-index order.
  Tensor<T> replay_all() const { return replay(index_.sample_ids()); }

  /// Training pass in normalised space; caches activations for backward().
  Tensor<T> forward(std::span<const SampleId> ids);
  void backward(const Tensor<T>& grad_out);

  std::vector<nn::Parameter<T>*> parameters();
  std::vector<const nn::Parameter<T>*> parameters() const;
  void zero_grad();

  EmbeddingBank<T>& embedding() { return bank_; }
  FeatureDecoder<T>& decoder() { return decoder_; }

  /// 2 * M * H: the stored per-group vectors.
  std::size_t latent_parameter_count() const { return 2 * bank_.num_groups() * bank_.group_size(); }
  /// Everything else: embedding FC modules and the decoder.
  std::size_t weight_parameter_count() const;

 private:
  std::vector<SampleSlot> slots_for(std::span<const SampleId> ids) const;
  void check_slots(std::span<const SampleSlot> slots) const;

  GroupIndex index_;
  DecoderConfig config_;
  nn::Rng rng_;
  EmbeddingBank<T> bank_;
  FeatureDecoder<T> decoder_;
  NormalizationStats stats_;
};

/// Free-function form of KRNetModel::latent_parameter_count.
template <typename T>
std::size_t latent_parameter_count(const KRNetModel<T>& model) {
  return model.latent_parameter_count();
}

/// Archive entries: group_index.json, decoder_config.json, norm_stats,
/// weights/<parameter name>.
template <typename T>
void save_krnet(const KRNetModel<T>& model, const std::filesystem::path& path);
KRNetModel<float> load_krnet(const std::filesystem::path& path);

/// Copy named float32 arrays from an archive into parameters (shapes must match).
template <typename T>
void load_weights(const class Archive& archive, std::span<nn::Parameter<T>* const> params);
template <typename T>
void store_weights(class Archive& archive, std::span<const nn::Parameter<T>* const> params);

}  // namespace krnet
