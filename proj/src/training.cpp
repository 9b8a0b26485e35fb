// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "krnet/nn/loss.hpp"
#include "krnet/nn/optim.hpp"

namespace krnet {

void RecorderTrainConfig::validate() const {
  if (batch_size == 0) throw ValidationError("recorder batch_size must be positive");
  if (!(lr_peak > 0.0) || !(lr_floor >= 0.0) || lr_floor > lr_peak) {
    throw ValidationError("recorder learning rates need 0 <= lr_floor <= lr_peak, lr_peak > 0");
  }
  if (total_iters() == 0) throw ValidationError("recorder training needs at least one iteration");
  if (weight_decay < 0.0) throw ValidationError("weight_decay must be non-negative");
  if (gamma < 0.0) throw ValidationError("gamma must be non-negative");
  if (log_every == 0) throw ValidationError("log_every must be positive");
}

nlohmann::ordered_json RecorderTrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["batch_size"] = batch_size;
  j["lr_peak"] = lr_peak;
  j["lr_floor"] = lr_floor;
  j["warm_iters"] = warm_iters;
  j["decay_iters"] = decay_iters;
  j["weight_decay"] = weight_decay;
  j["gamma"] = gamma;
  j["log_every"] = log_every;
  j["seed"] = seed;
  return j;
}

RecorderTrainConfig RecorderTrainConfig::from_json(const nlohmann::json& j) {
  RecorderTrainConfig c;
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.lr_peak = j.at("lr_peak").get<double>();
  c.lr_floor = j.at("lr_floor").get<double>();
  c.warm_iters = j.at("warm_iters").get<std::size_t>();
  c.decay_iters = j.at("decay_iters").get<std::size_t>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.log_every = j.value("log_every", std::size_t{100});
  c.seed = j.value("seed", std::uint64_t{0});
  c.validate();
  return c;
}

RecorderTrainConfig RecorderTrainConfig::cifar100() { return {}; }

RecorderTrainConfig RecorderTrainConfig::imagenet_subset() {
  RecorderTrainConfig c;
  c.warm_iters = 25000;
  c.decay_iters = 25000;
  c.gamma = 5e-4;
  return c;
}

double recorder_lr(const RecorderTrainConfig& config, std::size_t iteration) {
  if (iteration < config.warm_iters) return config.lr_peak;
  if (config.decay_iters == 0) return config.lr_floor;
  const double frac =
      std::min(1.0, static_cast<double>(iteration - config.warm_iters) / static_cast<double>(config.decay_iters));
  return config.lr_peak + (config.lr_floor - config.lr_peak) * frac;
}

template <typename T>
KrLoss<T> loss_kr(const Tensor<T>& predicted, const Tensor<T>& target, nn::Module<T>* head,
                  const NormalizationStats& stats, double gamma) {
  if (predicted.shape() != target.shape()) {
    throw ValidationError("loss_kr shape mismatch: " + shape_to_string(predicted.shape()) + " vs " +
                          shape_to_string(target.shape()));
  }
  if (gamma < 0.0) throw ValidationError("gamma must be non-negative");
  auto kr1 = nn::batch_squared_error(predicted, target);
  KrLoss<T> out;
  out.kr1 = kr1.value;
  out.grad = std::move(kr1.grad);
  if (head != nullptr) {
    if (!head->is_frozen()) throw ValidationError("loss_kr head has trainable parameters; freeze it first");
    const Tensor<T> head_target = head->infer(stats.denormalize(target));
    if (gamma > 0.0) {
      const Tensor<T> head_pred = head->forward(stats.denormalize(predicted));
      auto kr2 = nn::batch_squared_error(head_pred, head_target);
      out.kr2 = kr2.value;
      const Tensor<T> g = stats.denormalize_grad(head->backward(kr2.grad));
      const T scale = static_cast<T>(gamma);
      for (std::size_t i = 0; i < g.size(); ++i) out.grad[i] += scale * g[i];
    } else {
      out.kr2 = nn::batch_squared_error(head->infer(stats.denormalize(predicted)), head_target).value;
    }
  }
  out.total = out.kr1 + static_cast<T>(gamma) * out.kr2;
  return out;
}

void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write training log " + path.string());
  out.precision(9);
  out << "iteration,lr,L_kr1,L_kr2,total\n";
  for (const auto& r : log) out << r.iteration << ',' << r.lr << ',' << r.kr1 << ',' << r.kr2 << ',' << r.total << '\n';
}

template <typename T>
TrainReport train_recorder(Recorder<T>& recorder, std::span<const SampleId> ids, const Tensor<T>& normalized_targets,
                           nn::Module<T>* head, const NormalizationStats& stats, const RecorderTrainConfig& config) {
  config.validate();
  const std::size_t n = ids.size();
  if (n == 0) throw ValidationError("recorder training needs a non-empty corpus");
  if (normalized_targets.rank() == 0 || normalized_targets.dim(0) != n) {
    throw ValidationError("recorder targets do not match the sample IDs");
  }
  const auto start_time = std::chrono::steady_clock::now();
  nn::Adam<T> optimizer(recorder.parameters(), {.weight_decay = config.weight_decay});
  nn::Rng rng(config.seed ^ 0x5eedULL);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;
  const std::size_t batch = std::min(config.batch_size, n);
  std::vector<std::size_t> rows(batch);
  std::vector<SampleId> batch_ids(batch);

  TrainReport report;
  report.iterations = config.total_iters();
  for (std::size_t it = 0; it < config.total_iters(); ++it) {
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == n) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      rows[b] = order[cursor++];
      batch_ids[b] = ids[rows[b]];
    }
    const Tensor<T> targets = gather_rows(normalized_targets, rows);
    optimizer.zero_grad();
    const Tensor<T> pred = recorder.forward(batch_ids, targets);
    const KrLoss<T> loss = loss_kr(pred, targets, head, stats, config.gamma);
    if (!std::isfinite(static_cast<double>(loss.total))) {
      throw RuntimeFailure("recorder loss became non-finite at iteration " + std::to_string(it) +
                           " (weight_decay=" + std::to_string(config.weight_decay) +
                           ", lr=" + std::to_string(recorder_lr(config, it)) +
                           "); recorders need weight_decay 0 and a stable learning rate");
    }
    recorder.backward(loss.grad);
    const double lr = recorder_lr(config, it);
    optimizer.step(lr);
    if (it % config.log_every == 0 || it + 1 == config.total_iters()) {
      report.log.push_back({it, lr, static_cast<double>(loss.kr1), static_cast<double>(loss.kr2),
                            static_cast<double>(loss.total)});
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return report;
}

namespace {

template <typename A, typename B>
double mean_squared(const Tensor<A>& a, const Tensor<B>& b) {
  if (a.size() != b.size()) throw ValidationError("MSE operands differ in size");
  if (a.size() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

NormalizationStats resolve_stats(const FeatureCorpus& corpus, const std::optional<NormalizationStats>& inherited) {
  corpus.validate();
  if (corpus.empty()) throw ValidationError("recorder training needs a non-empty corpus");
  return inherited ? *inherited : NormalizationStats::compute(corpus.features);
}

}  // namespace

template <typename T>
KRNetFit<T> fit_krnet(const FeatureCorpus& corpus, std::size_t group_size, const DecoderConfig& decoder,
                      const RecorderTrainConfig& config, nn::Module<T>* head,
                      const std::optional<NormalizationStats>& inherited) {
  const NormalizationStats stats = resolve_stats(corpus, inherited);
  const auto samples = corpus.labeled_samples();
  KRNetFit<T> fit;
  fit.model = std::make_unique<KRNetModel<T>>(GroupIndex::build(samples, group_size), decoder, config.seed);
  fit.model->set_norm_stats(stats);
  const Tensor<T> targets = stats.normalize(corpus.features.template cast<T>());
  KRNetRecorder<T> recorder(*fit.model);
  fit.report = train_recorder<T>(recorder, corpus.ids, targets, head, stats, config);
  const Tensor<T> pred = fit.model->predict_normalized(corpus.ids);
  fit.report.final_mse_normalized = mean_squared(pred, targets);
  fit.report.final_mse_raw = mean_squared(stats.denormalize(pred), corpus.features);
  return fit;
}

template <typename T>
AEFit<T> fit_ae(const FeatureCorpus& corpus, const DecoderConfig& decoder, const RecorderTrainConfig& config,
                nn::Module<T>* head, const std::optional<NormalizationStats>& inherited) {
  const NormalizationStats stats = resolve_stats(corpus, inherited);
  AEFit<T> fit;
  fit.model = std::make_unique<AEModel<T>>(decoder, config.seed);
  fit.model->set_norm_stats(stats);
  const Tensor<T> targets = stats.normalize(corpus.features.template cast<T>());
  AERecorder<T> recorder(*fit.model);
  fit.report = train_recorder<T>(recorder, corpus.ids, targets, head, stats, config);
  fit.bank = fit.model->build_latent_bank(corpus.features, corpus.ids);
  const Tensor<T> raw = fit.model->replay(fit.bank);
  fit.report.final_mse_raw = mean_squared(raw, corpus.features);
  fit.report.final_mse_normalized = mean_squared(stats.normalize(raw), targets);
  return fit;
}

FeatureCorpus replay_corpus(const KRNetModel<float>& model) {
  FeatureCorpus out;
  out.ids = model.group_index().sample_ids();
  out.features = model.replay(out.ids);
  out.labels.reserve(out.ids.size());
  for (SampleId id : out.ids) out.labels.push_back(model.group_index().label_of(id));
  return out;
}

FeatureCorpus self_taught_targets(const KRNetModel<float>* previous, const FeatureCorpus& current) {
  if (previous == nullptr) return current;
  return merge_corpora(replay_corpus(*previous), current);
}

#define KRNET_INSTANTIATE(T)                                                                                     \
  template KrLoss<T> loss_kr<T>(const Tensor<T>&, const Tensor<T>&, nn::Module<T>*, const NormalizationStats&, \
                                double);                                                                       \
  template TrainReport train_recorder<T>(Recorder<T>&, std::span<const SampleId>, const Tensor<T>&,            \
                                         nn::Module<T>*, const NormalizationStats&, const RecorderTrainConfig&); \
  template KRNetFit<T> fit_krnet<T>(const FeatureCorpus&, std::size_t, const DecoderConfig&,                   \
                                    const RecorderTrainConfig&, nn::Module<T>*,                                \
                                    const std::optional<NormalizationStats>&);                                 \
  template AEFit<T> fit_ae<T>(const FeatureCorpus&, const DecoderConfig&, const RecorderTrainConfig&,          \
                              nn::Module<T>*, const std::optional<NormalizationStats>&);

KRNET_INSTANTIATE(float)
KRNET_INSTANTIATE(double)
#undef KRNET_INSTANTIATE

}  // namespace krnet
