// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Recorder training: the two-term reconstruction loss, the constant-then-
// linear learning-rate schedule, and the self-taught target builder.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "krnet/ae_model.hpp"
#include "krnet/corpus.hpp"
#include "krnet/krnet_model.hpp"

namespace krnet {

struct RecorderTrainConfig {
  std::size_t batch_size = 1000;
  double lr_peak = 3e-3;
  double lr_floor = 3e-6;
  std::size_t warm_iters = 20000;
  std::size_t decay_iters = 20000;
  /// Must stay 0 for real runs; nonzero values exist only for sanity comparisons.
  double weight_decay = 0.0;
  double gamma = 1e-3;
  std::size_t log_every = 100;
  std::uint64_t seed = 0;

  std::size_t total_iters() const { return warm_iters + decay_iters; }
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static RecorderTrainConfig from_json(const nlohmann::json& j);

  static RecorderTrainConfig cifar100();
  static RecorderTrainConfig imagenet_subset();
};

/// lr_peak for it < warm_iters, then linear to lr_floor at warm + decay, then flat.
double recorder_lr(const RecorderTrainConfig& config, std::size_t iteration);

template <typename T>
struct KrLoss {
  T kr1{};    // (1/B) sum ||f_hat - f||^2, normalised space
  T kr2{};    // (1/B) sum ||head(f_hat) - head(f)||^2, raw space
  T total{};  // kr1 + gamma * kr2
  Tensor<T> grad;
};

/// Reconstruction loss over a batch. `head` is the frozen feature part of the
/// current task learner; it is applied to denormalised maps. A null head or
/// gamma = 0 drops the second term. Throws ValidationError for a head with
/// trainable parameters.
template <typename T>
KrLoss<T> loss_kr(const Tensor<T>& predicted, const Tensor<T>& target, nn::Module<T>* head,
                  const NormalizationStats& stats, double gamma);

/// What the training loop needs from a recorder.
template <typename T>
class Recorder {
 public:
  virtual ~Recorder() = default;
  /// Normalised prediction for a batch; `targets` are the normalised truths.
  virtual Tensor<T> forward(std::span<const SampleId> ids, const Tensor<T>& targets) = 0;
  virtual void backward(const Tensor<T>& grad) = 0;
  virtual std::vector<nn::Parameter<T>*> parameters() = 0;
};

template <typename T>
class KRNetRecorder final : public Recorder<T> {
 public:
  explicit KRNetRecorder(KRNetModel<T>& model) : model_(model) {}
  Tensor<T> forward(std::span<const SampleId> ids, const Tensor<T>&) override { return model_.forward(ids); }
  void backward(const Tensor<T>& grad) override { model_.backward(grad); }
  std::vector<nn::Parameter<T>*> parameters() override { return model_.parameters(); }

 private:
  KRNetModel<T>& model_;
};

template <typename T>
class AERecorder final : public Recorder<T> {
 public:
  explicit AERecorder(AEModel<T>& model) : model_(model) {}
  Tensor<T> forward(std::span<const SampleId>, const Tensor<T>& targets) override { return model_.forward(targets); }
  void backward(const Tensor<T>& grad) override { model_.backward(grad); }
  std::vector<nn::Parameter<T>*> parameters() override { return model_.parameters(); }

 private:
  AEModel<T>& model_;
};

struct TrainLogRow {
  std::size_t iteration = 0;
  double lr = 0.0;
  double kr1 = 0.0;
  double kr2 = 0.0;
  double total = 0.0;
};

struct TrainReport {
  std::size_t iterations = 0;
  std::vector<TrainLogRow> log;
  /// Mean per-element squared error over the whole corpus after training,
  /// in normalised and raw scale.
  double final_mse_normalized = 0.0;
  double final_mse_raw = 0.0;
  double seconds = 0.0;
};

/// Header plus one row per logged iteration.
void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path);

/// Adam over `recorder`, sampling shuffled batches of the normalised corpus.
/// Aborts with RuntimeFailure on a non-finite loss. Returns the loss log;
/// final MSEs are left to the caller.
template <typename T>
TrainReport train_recorder(Recorder<T>& recorder, std::span<const SampleId> ids, const Tensor<T>& normalized_targets,
                           nn::Module<T>* head, const NormalizationStats& stats, const RecorderTrainConfig& config);

/// Build, normalise and train a KRNet on a labelled corpus. Stats are
/// recomputed from the corpus unless `inherited` is given.
template <typename T>
struct KRNetFit {
  std::unique_ptr<KRNetModel<T>> model;
  TrainReport report;
};
template <typename T>
KRNetFit<T> fit_krnet(const FeatureCorpus& corpus, std::size_t group_size, const DecoderConfig& decoder,
                      const RecorderTrainConfig& config, nn::Module<T>* head = nullptr,
                      const std::optional<NormalizationStats>& inherited = std::nullopt);

template <typename T>
struct AEFit {
  std::unique_ptr<AEModel<T>> model;
  LatentBank bank;
  TrainReport report;
};
template <typename T>
AEFit<T> fit_ae(const FeatureCorpus& corpus, const DecoderConfig& decoder, const RecorderTrainConfig& config,
                nn::Module<T>* head = nullptr, const std::optional<NormalizationStats>& inherited = std::nullopt);

/// Replays of every sample stored in `previous` (labelled by group), merged
/// with the real `current` features. Rejects ID collisions.
FeatureCorpus self_taught_targets(const KRNetModel<float>* previous, const FeatureCorpus& current);

/// Replay every sample stored in `model` as a labelled corpus.
FeatureCorpus replay_corpus(const KRNetModel<float>& model);

}  // namespace krnet
