// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Class-incremental learning with recited features: F1 is trained on the
// base task and frozen; each increment retrains F2 on current features mixed
// with features replayed by KRNet, then retrains the recorder on the union.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "krnet/experiment/datasets.hpp"
#include "krnet/experiment/feature_cache.hpp"
#include "krnet/kril/backbone.hpp"
#include "krnet/kril/task_sequence.hpp"
#include "krnet/training.hpp"

namespace krnet::kril {

struct ClassifierTrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  /// Epochs after which the learning rate is multiplied by lr_decay.
  std::vector<std::size_t> lr_milestones;
  double lr_decay = 0.1;
  /// Image-space augmentation for backbone training (0 disables cropping).
  std::size_t augment_pad = 0;

  double lr_at(std::size_t epoch) const;
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ClassifierTrainConfig from_json(const nlohmann::json& j);
};

/// Where old-task features come from during an increment.
enum class ReplayMode { kRecorder, kOracle, kNone };
std::string to_string(ReplayMode mode);

struct KrilConfig {
  std::size_t group_size = 64;
  DecoderConfig decoder;
  RecorderTrainConfig recorder;
  ClassifierTrainConfig base;
  ClassifierTrainConfig incremental;
  double lambda = 2.0;
  /// Learning-rate multiplier of F2's feature part during increments.
  double backbone_lr_scale = 0.05;
  bool double_krnet = true;
  bool use_aux_loss = true;
  bool use_kr2_loss = true;
  bool inherit_norm_stats = false;
  /// Also train the recorder after the last increment.
  bool train_final_recorder = true;
  ReplayMode replay = ReplayMode::kRecorder;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static KrilConfig from_json(const nlohmann::json& j);
};

template <typename T>
struct IncLoss {
  T cls{};
  T aux{};
  T total{};
  Tensor<T> grad_logits;
  Tensor<T> grad_embedding;
};

/// Cross-entropy over every row plus lambda * (1/B) * sum over replayed rows
/// of ||previous - current||^2 on F2 feature vectors. Rows with mask 0 get no
/// auxiliary gradient. `previous` may be null only when no row is replayed.
template <typename T>
IncLoss<T> incremental_loss(const Tensor<T>& logits, std::span<const std::size_t> labels, const Tensor<T>& embedding,
                            const Tensor<T>* previous, std::span<const std::uint8_t> replay_mask, double lambda);

struct TaskMetrics {
  std::size_t task = 0;
  std::size_t classes_seen = 0;
  double accuracy = 0.0;
  /// Accuracy on the test images of each task 0..t, evaluated after task t.
  std::vector<double> per_task_accuracy;
  double loss_cls = 0.0;
  double loss_aux = 0.0;
  double recorder_kr1 = 0.0;
  double recorder_kr2 = 0.0;
  double recorder_mse_raw = 0.0;
  /// MSE of the replayed old features against their real F1 outputs.
  double replay_mse = 0.0;
  std::size_t current_rows = 0;
  std::size_t replayed_rows = 0;
  std::uint64_t f1_hash = 0;
  std::uint64_t previous_f2_hash_before = 0;
  std::uint64_t previous_f2_hash_after = 0;
  double seconds = 0.0;
};

struct KrilResult {
  std::string method;
  TaskSequence tasks;
  std::vector<TaskMetrics> steps;

  double final_accuracy() const { return steps.empty() ? 0.0 : steps.back().accuracy; }
  std::vector<double> curve() const;
};

struct RunPaths {
  /// Empty disables checkpoint writing.
  std::filesystem::path checkpoints;
};

/// Top-1 accuracy of classifier(F2(F1(x))) over `test`, where classifier
/// output k means class `class_order[k]`.
double evaluate(const SplitBackbone& model, const experiment::ImageSet& test, std::span<const ClassLabel> class_order);
/// Same on precomputed F1 features.
double evaluate_features(const SplitBackbone& model, const Tensor<float>& features,
                         std::span<const ClassLabel> labels, std::span<const ClassLabel> class_order);

/// Trains F1 and F2 together from scratch on the images of `classes`.
SplitBackbone train_backbone(const experiment::ImageSet& train, std::span<const ClassLabel> classes,
                             const BackboneSpec& spec, const ClassifierTrainConfig& config, std::uint64_t seed,
                             double* final_loss = nullptr);

/// Algorithm: base training, base recorder, then per increment {replay,
/// extract, train F2 on the mixture, retrain the recorder}. A supplied
/// `base` (trained on task 0) is reused instead of training a new one.
KrilResult run_kril(const experiment::ImageDataset& data, const TaskSequence& tasks, const BackboneSpec& spec,
                    const KrilConfig& config, const SplitBackbone* base = nullptr,
                    experiment::FeatureCache* cache = nullptr, const RunPaths& paths = {});

struct BaselineBounds {
  KrilResult joint;
  KrilResult fine_tune;
  KrilResult oracle;
};

/// Joint training retrains from scratch on all seen classes at every step;
/// fine-tuning replays nothing; the oracle replays real cached features.
BaselineBounds baseline_bounds(const experiment::ImageDataset& data, const TaskSequence& tasks,
                               const BackboneSpec& spec, const KrilConfig& config, const SplitBackbone* base = nullptr,
                               experiment::FeatureCache* cache = nullptr);

/// Storage of every F2 parameter under weights/<name> plus the class order.
void save_task_learner(const SplitBackbone& model, std::span<const ClassLabel> class_order,
                       const std::filesystem::path& path);

/// One row per (method, task): method,task,classes_seen,accuracy,loss_cls,loss_aux,current_rows,
/// replayed_rows,replay_mse,recorder_kr1,recorder_kr2,recorder_mse_raw,f1_hash,previous_f2_hash_before,
/// previous_f2_hash_after,per_task_accuracy. Wall-clock time is left out so reruns compare bitwise.
void write_metrics_csv(const std::vector<const KrilResult*>& results, const std::filesystem::path& path);

}  // namespace krnet::kril
