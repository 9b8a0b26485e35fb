// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/krnet_model.hpp"

#include <algorithm>

#include "krnet/archive.hpp"

namespace krnet {

namespace {

constexpr std::size_t kReplayChunk = 256;

}  // namespace

// ---------------------------------------------------------------- EmbeddingBank

template <typename T>
EmbeddingBank<T>::EmbeddingBank(std::size_t num_groups, std::size_t group_size, std::size_t gn_groups, double slope,
                                nn::Rng& rng)
    : static_("embedding.static", {num_groups, group_size}), dynamic_("embedding.dynamic", {num_groups, group_size}) {
  std::normal_distribution<double> dist(0.0, 0.02);
  for (auto& v : static_.value.storage()) v = static_cast<T>(dist(rng));
  for (auto& v : dynamic_.value.storage()) v = static_cast<T>(dist(rng));
  fc_static_.add(nn::make_fc_module<T>(group_size, group_size, gn_groups, slope, "embedding.fc_static", rng));
  fc_dynamic_.add(nn::make_fc_module<T>(group_size, group_size, gn_groups, slope, "embedding.fc_dynamic", rng));
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> EmbeddingBank<T>::raw_inputs(std::span<const SampleSlot> slots) const {
  const std::size_t h = group_size();
  Tensor<T> s({slots.size(), h});
  Tensor<T> d({slots.size(), h});
  for (std::size_t b = 0; b < slots.size(); ++b) {
    const auto [m, n] = slots[b];
    std::copy_n(static_.value.data() + m * h, h, s.data() + b * h);
    apply_local_permutation<T>(std::span<const T>(dynamic_.value.data() + m * h, h), n,
                               std::span<T>(d.data() + b * h, h));
  }
  return {std::move(s), std::move(d)};
}

template <typename T>
Tensor<T> EmbeddingBank<T>::concat(const Tensor<T>& a, const Tensor<T>& b) const {
  const std::size_t batch = a.dim(0);
  const std::size_t h = group_size();
  Tensor<T> e({batch, 2 * h});
  for (std::size_t i = 0; i < batch; ++i) {
    std::copy_n(a.data() + i * h, h, e.data() + i * 2 * h);
    std::copy_n(b.data() + i * h, h, e.data() + i * 2 * h + h);
  }
  return e;
}

template <typename T>
Tensor<T> EmbeddingBank<T>::forward(std::span<const SampleSlot> slots) {
  cached_slots_.assign(slots.begin(), slots.end());
  auto [s, d] = raw_inputs(slots);
  return concat(fc_static_.forward(s), fc_dynamic_.forward(d));
}

template <typename T>
Tensor<T> EmbeddingBank<T>::infer(std::span<const SampleSlot> slots) const {
  auto [s, d] = raw_inputs(slots);
  return concat(fc_static_.infer(s), fc_dynamic_.infer(d));
}

template <typename T>
void EmbeddingBank<T>::backward(const Tensor<T>& grad_e) {
  const std::size_t batch = cached_slots_.size();
  const std::size_t h = group_size();
  Tensor<T> gs({batch, h});
  Tensor<T> gd({batch, h});
  for (std::size_t i = 0; i < batch; ++i) {
    std::copy_n(grad_e.data() + i * 2 * h, h, gs.data() + i * h);
    std::copy_n(grad_e.data() + i * 2 * h + h, h, gd.data() + i * h);
  }
  const Tensor<T> gvs = fc_static_.backward(gs);
  const Tensor<T> gvd = fc_dynamic_.backward(gd);
  for (std::size_t i = 0; i < batch; ++i) {
    const auto [m, n] = cached_slots_[i];
    if (!static_.frozen) {
      for (std::size_t k = 0; k < h; ++k) static_.grad[m * h + k] += gvs[i * h + k];
    }
    if (!dynamic_.frozen) {
      accumulate_permutation_adjoint<T>(std::span<const T>(gvd.data() + i * h, h), n,
                                        std::span<T>(dynamic_.grad.data() + m * h, h));
    }
  }
}

template <typename T>
void EmbeddingBank<T>::collect_parameters(std::vector<nn::Parameter<T>*>& out) {
  out.push_back(&static_);
  out.push_back(&dynamic_);
  fc_static_.collect_parameters(out);
  fc_dynamic_.collect_parameters(out);
}

// ---------------------------------------------------------------- KRNetModel

template <typename T>
KRNetModel<T>::KRNetModel(GroupIndex index, DecoderConfig config, std::uint64_t seed)
    : index_(std::move(index)),
      config_(std::move(config)),
      rng_(seed),
      bank_((config_.validate(), index_.num_groups()), index_.group_size(), config_.gn_groups, config_.leaky_slope,
            rng_),
      decoder_(config_, rng_) {
  if (index_.num_groups() == 0) throw ValidationError("KRNet needs a non-empty group index");
  if (config_.latent_dim != 2 * index_.group_size()) {
    throw ValidationError("decoder latent_dim " + std::to_string(config_.latent_dim) + " must equal 2H = " +
                          std::to_string(2 * index_.group_size()));
  }
  stats_.min.assign(config_.target.channels, 0.0f);
  stats_.max.assign(config_.target.channels, 1.0f);
}

template <typename T>
void KRNetModel<T>::set_norm_stats(NormalizationStats stats) {
  if (stats.channels() != config_.target.channels) {
    throw ValidationError("normalization stats have " + std::to_string(stats.channels()) + " channels, model has " +
                          std::to_string(config_.target.channels));
  }
  stats_ = std::move(stats);
}

template <typename T>
void KRNetModel<T>::check_slots(std::span<const SampleSlot> slots) const {
  for (const auto& s : slots) {
    if (s.group >= index_.num_groups() || s.local >= index_.groups()[s.group].count) {
      throw ValidationError("embedding pair (m=" + std::to_string(s.group) + ", n=" + std::to_string(s.local) +
                            ") is outside the group index");
    }
  }
}

template <typename T>
std::vector<SampleSlot> KRNetModel<T>::slots_for(std::span<const SampleId> ids) const {
  std::vector<SampleSlot> slots;
  slots.reserve(ids.size());
  for (SampleId id : ids) slots.push_back(index_.slot(id));
  return slots;
}

template <typename T>
Tensor<T> KRNetModel<T>::embed(std::span<const SampleSlot> slots) const {
  check_slots(slots);
  return bank_.infer(slots);
}

template <typename T>
Tensor<T> KRNetModel<T>::decode(const Tensor<T>& embeddings) const {
  return decoder_.infer(embeddings);
}

template <typename T>
Tensor<T> KRNetModel<T>::predict_normalized(std::span<const SampleId> ids) const {
  const auto slots = slots_for(ids);
  Tensor<T> out(config_.target.batch_shape(ids.size()));
  const std::size_t row = config_.target.numel();
  for (std::size_t start = 0; start < slots.size(); start += kReplayChunk) {
    const std::size_t count = std::min(kReplayChunk, slots.size() - start);
    const Tensor<T> part = decode(embed(std::span<const SampleSlot>(slots).subspan(start, count)));
    std::copy(part.storage().begin(), part.storage().end(), out.data() + start * row);
  }
  return out;
}

template <typename T>
Tensor<T> KRNetModel<T>::replay(std::span<const SampleId> ids) const {
  return stats_.denormalize(predict_normalized(ids));
}

template <typename T>
Tensor<T> KRNetModel<T>::forward(std::span<const SampleId> ids) {
  const auto slots = slots_for(ids);
  return decoder_.forward(bank_.forward(slots));
}

template <typename T>
void KRNetModel<T>::backward(const Tensor<T>& grad_out) {
  bank_.backward(decoder_.backward(grad_out));
}

template <typename T>
std::vector<nn::Parameter<T>*> KRNetModel<T>::parameters() {
  std::vector<nn::Parameter<T>*> out;
  bank_.collect_parameters(out);
  decoder_.collect_parameters(out);
  return out;
}

template <typename T>
std::vector<const nn::Parameter<T>*> KRNetModel<T>::parameters() const {
  auto params = const_cast<KRNetModel*>(this)->parameters();
  return {params.begin(), params.end()};
}

template <typename T>
void KRNetModel<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(T{});
}

template <typename T>
std::size_t KRNetModel<T>::weight_parameter_count() const {
  std::size_t total = 0;
  for (const auto* p : parameters()) total += p->value.size();
  return total - latent_parameter_count();
}

// ---------------------------------------------------------------- persistence

template <typename T>
void store_weights(Archive& archive, std::span<const nn::Parameter<T>* const> params) {
  for (const auto* p : params) {
    std::vector<float> data(p->value.storage().begin(), p->value.storage().end());
    archive.add_floats("weights/" + p->name, p->value.shape(), data);
  }
}

template <typename T>
void load_weights(const Archive& archive, std::span<nn::Parameter<T>* const> params) {
  for (auto* p : params) {
    const Tensor<float> stored = archive.floats("weights/" + p->name);
    if (stored.shape() != p->value.shape()) {
      throw ValidationError("weight " + p->name + " has shape " + shape_to_string(stored.shape()) + ", expected " +
                            shape_to_string(p->value.shape()));
    }
    std::copy(stored.storage().begin(), stored.storage().end(), p->value.storage().begin());
  }
}

template <typename T>
void save_krnet(const KRNetModel<T>& model, const std::filesystem::path& path) {
  Archive archive;
  archive.add_json("group_index.json", model.group_index().to_json());
  archive.add_json("decoder_config.json", model.config().to_json());
  const auto pairs = model.norm_stats().interleaved();
  archive.add_floats("norm_stats", {model.norm_stats().channels(), 2}, pairs);
  const auto params = model.parameters();
  store_weights<T>(archive, params);
  archive.write(path);
}

KRNetModel<float> load_krnet(const std::filesystem::path& path) {
  const Archive archive = Archive::read(path);
  KRNetModel<float> model(GroupIndex::from_json(archive.json("group_index.json")),
                          DecoderConfig::from_json(archive.json("decoder_config.json")), 0);
  model.set_norm_stats(NormalizationStats::from_interleaved(archive.floats("norm_stats").storage()));
  const auto params = model.parameters();
  load_weights<float>(archive, params);
  return model;
}

#define KRNET_INSTANTIATE(T)                                                                       \
  template class EmbeddingBank<T>;                                                                 \
  template class KRNetModel<T>;                                                                    \
  template void save_krnet<T>(const KRNetModel<T>&, const std::filesystem::path&);                 \
  template void store_weights<T>(Archive&, std::span<const nn::Parameter<T>* const>);              \
  template void load_weights<T>(const Archive&, std::span<nn::Parameter<T>* const>);

KRNET_INSTANTIATE(float)
KRNET_INSTANTIATE(double)
#undef KRNET_INSTANTIATE

}  // namespace krnet
