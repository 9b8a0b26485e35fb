// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/ae_model.hpp"

#include <algorithm>
#include <fstream>

#include "krnet/archive.hpp"
#include "krnet/krnet_model.hpp"

namespace krnet {

namespace {

constexpr std::size_t kChunk = 256;

std::filesystem::path sidecar(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

}  // namespace

void save_latent_bank(const LatentBank& bank, const std::filesystem::path& path) {
  if (bank.codes.rank() != 2 || bank.codes.dim(0) != bank.ids.size()) {
    throw ValidationError("latent bank rows do not match its sample IDs");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write latent bank " + path.string());
  out.write(reinterpret_cast<const char*>(bank.codes.data()),
            static_cast<std::streamsize>(bank.codes.size() * sizeof(float)));
  nlohmann::ordered_json j;
  j["N"] = bank.size();
  j["dim"] = bank.dim();
  j["dtype"] = "float32";
  j["sample_ids"] = bank.ids;
  std::ofstream meta(sidecar(path));
  if (!meta) throw RuntimeFailure("cannot write " + sidecar(path).string());
  meta << j.dump(2) << "\n";
}

LatentBank load_latent_bank(const std::filesystem::path& path) {
  std::ifstream meta(sidecar(path));
  if (!meta) throw ValidationError("missing latent bank sidecar " + sidecar(path).string());
  const auto j = nlohmann::json::parse(meta);
  LatentBank bank;
  const auto n = j.at("N").get<std::size_t>();
  const auto dim = j.at("dim").get<std::size_t>();
  bank.ids = j.at("sample_ids").get<std::vector<SampleId>>();
  if (bank.ids.size() != n) throw ValidationError("latent bank sidecar lists the wrong number of IDs");
  bank.codes = Tensor<float>({n, dim});
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("missing latent bank " + path.string());
  in.read(reinterpret_cast<char*>(bank.codes.data()), static_cast<std::streamsize>(bank.codes.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(bank.codes.size() * sizeof(float)) || in.peek() != EOF) {
    throw ValidationError("latent bank " + path.string() + " does not hold N x dim float32 values");
  }
  return bank;
}

template <typename T>
AEModel<T>::AEModel(DecoderConfig config, std::uint64_t seed)
    : config_(std::move(config)), rng_(seed), decoder_((config_.validate(), config_), rng_, "ae.decoder") {
  const auto& c = config_;
  const std::size_t g = c.gn_groups;
  const double slope = c.leaky_slope;
  encoder_.add(nn::make_conv_module<T>(c.target.channels, c.c1, c.conv_kernel, 1, c.conv_kernel / 2, g, slope,
                                       "ae.encoder.in", rng_));
  for (int i = 0; i < 2; ++i) {
    encoder_.template emplace<nn::ResidualBlock<T>>(c.c1, c.c1, 1, slope, g, "ae.encoder.pre" + std::to_string(i),
                                                    rng_);
  }
  encoder_.add(nn::make_conv_module<T>(c.c1, c.c0, c.deconv_kernel, c.deconv_stride, c.deconv_pad(), g, slope,
                                       "ae.encoder.down", rng_));
  for (int i = 0; i < 4; ++i) {
    encoder_.template emplace<nn::ResidualBlock<T>>(c.c0, c.c0, 1, slope, g, "ae.encoder.post" + std::to_string(i),
                                                    rng_);
  }
  encoder_.template emplace<nn::Reshape<T>>(Shape{c.d1()});
  encoder_.add(nn::make_fc_module<T>(c.d1(), c.d0, g, slope, "ae.encoder.fc0", rng_));
  encoder_.template emplace<nn::Linear<T>>(c.d0, c.latent_dim, "ae.encoder.code", rng_);
  stats_.min.assign(c.target.channels, 0.0f);
  stats_.max.assign(c.target.channels, 1.0f);
}

template <typename T>
void AEModel<T>::set_norm_stats(NormalizationStats stats) {
  if (stats.channels() != config_.target.channels) {
    throw ValidationError("normalization stats do not match the AE channel count");
  }
  stats_ = std::move(stats);
}

template <typename T>
void AEModel<T>::check_features(const Tensor<T>& x) const {
  const Shape expected = config_.target.batch_shape(x.rank() == 4 ? x.dim(0) : 0);
  if (x.shape() != expected) {
    throw ValidationError("AE expects feature maps " + config_.target.to_string() + ", got " +
                          shape_to_string(x.shape()));
  }
}

template <typename T>
Tensor<T> AEModel<T>::encode(const Tensor<T>& normalized) const {
  check_features(normalized);
  if (normalized.dim(0) == 0) return Tensor<T>({0, config_.latent_dim});
  return encoder_.infer(normalized);
}

template <typename T>
Tensor<T> AEModel<T>::decode(const Tensor<T>& codes) const {
  return decoder_.infer(codes);
}

template <typename T>
Tensor<T> AEModel<T>::forward(const Tensor<T>& normalized) {
  check_features(normalized);
  return decoder_.forward(encoder_.forward(normalized));
}

template <typename T>
void AEModel<T>::backward(const Tensor<T>& grad_out) {
  encoder_.backward(decoder_.backward(grad_out));
}

template <typename T>
LatentBank AEModel<T>::build_latent_bank(const Tensor<float>& raw_features, const std::vector<SampleId>& ids) const {
  if (raw_features.rank() != 4 || raw_features.dim(0) != ids.size()) {
    throw ValidationError("latent bank needs one feature map per sample ID (" + std::to_string(ids.size()) +
                          " IDs, features " + shape_to_string(raw_features.shape()) + ")");
  }
  LatentBank bank;
  bank.ids = ids;
  bank.codes = Tensor<float>({ids.size(), config_.latent_dim});
  const std::size_t row = config_.target.numel();
  for (std::size_t start = 0; start < ids.size(); start += kChunk) {
    const std::size_t count = std::min(kChunk, ids.size() - start);
    Tensor<T> chunk(config_.target.batch_shape(count));
    std::copy_n(raw_features.data() + start * row, count * row, chunk.data());
    const Tensor<T> codes = encode(stats_.normalize(chunk));
    std::copy(codes.storage().begin(), codes.storage().end(), bank.codes.data() + start * config_.latent_dim);
  }
  return bank;
}

template <typename T>
Tensor<T> AEModel<T>::replay(const LatentBank& bank) const {
  if (bank.dim() != config_.latent_dim) throw ValidationError("latent bank width does not match the AE code size");
  Tensor<T> out(config_.target.batch_shape(bank.size()));
  const std::size_t row = config_.target.numel();
  for (std::size_t start = 0; start < bank.size(); start += kChunk) {
    const std::size_t count = std::min(kChunk, bank.size() - start);
    Tensor<T> codes({count, config_.latent_dim});
    std::copy_n(bank.codes.data() + start * config_.latent_dim, count * config_.latent_dim, codes.data());
    const Tensor<T> part = stats_.denormalize(decode(codes));
    std::copy(part.storage().begin(), part.storage().end(), out.data() + start * row);
  }
  return out;
}

template <typename T>
std::vector<nn::Parameter<T>*> AEModel<T>::parameters() {
  std::vector<nn::Parameter<T>*> out;
  encoder_.collect_parameters(out);
  decoder_.collect_parameters(out);
  return out;
}

template <typename T>
std::vector<const nn::Parameter<T>*> AEModel<T>::parameters() const {
  auto params = const_cast<AEModel*>(this)->parameters();
  return {params.begin(), params.end()};
}

template <typename T>
std::size_t AEModel<T>::weight_parameter_count() const {
  std::size_t total = 0;
  for (const auto* p : parameters()) total += p->value.size();
  return total;
}

void save_ae(const AEModel<float>& model, const std::filesystem::path& path) {
  Archive archive;
  archive.add_json("decoder_config.json", model.config().to_json());
  archive.add_floats("norm_stats", {model.norm_stats().channels(), 2}, model.norm_stats().interleaved());
  const auto params = model.parameters();
  store_weights<float>(archive, params);
  archive.write(path);
}

AEModel<float> load_ae(const std::filesystem::path& path) {
  const Archive archive = Archive::read(path);
  AEModel<float> model(DecoderConfig::from_json(archive.json("decoder_config.json")), 0);
  model.set_norm_stats(NormalizationStats::from_interleaved(archive.floats("norm_stats").storage()));
  const auto params = model.parameters();
  load_weights<float>(archive, params);
  return model;
}

template class AEModel<float>;
template class AEModel<double>;

}  // namespace krnet
