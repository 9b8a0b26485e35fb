// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/kril/kril.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>

#include "krnet/archive.hpp"
#include "krnet/nn/loss.hpp"
#include "krnet/nn/optim.hpp"

namespace krnet::kril {

// ---------------------------------------------------------------- configs

double ClassifierTrainConfig::lr_at(std::size_t epoch) const {
  double out = lr;
  for (std::size_t m : lr_milestones) {
    if (epoch >= m) out *= lr_decay;
  }
  return out;
}

void ClassifierTrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0) throw ValidationError("classifier training needs epochs and batch_size > 0");
  if (!(lr > 0.0)) throw ValidationError("classifier lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ValidationError("momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw ValidationError("weight_decay must be non-negative");
}

nlohmann::ordered_json ClassifierTrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["lr"] = lr;
  j["momentum"] = momentum;
  j["weight_decay"] = weight_decay;
  j["lr_milestones"] = lr_milestones;
  j["lr_decay"] = lr_decay;
  j["augment_pad"] = augment_pad;
  return j;
}

ClassifierTrainConfig ClassifierTrainConfig::from_json(const nlohmann::json& j) {
  ClassifierTrainConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.lr_milestones = j.at("lr_milestones").get<std::vector<std::size_t>>();
  c.lr_decay = j.at("lr_decay").get<double>();
  c.augment_pad = j.at("augment_pad").get<std::size_t>();
  c.validate();
  return c;
}

std::string to_string(ReplayMode mode) {
  switch (mode) {
    case ReplayMode::kRecorder:
      return "recorder";
    case ReplayMode::kOracle:
      return "oracle";
    case ReplayMode::kNone:
      return "none";
  }
  return "unknown";
}

namespace {

ReplayMode replay_mode_from(const std::string& s) {
  if (s == "recorder") return ReplayMode::kRecorder;
  if (s == "oracle") return ReplayMode::kOracle;
  if (s == "none") return ReplayMode::kNone;
  throw ValidationError("unknown replay mode '" + s + "' (expected recorder, oracle or none)");
}

}  // namespace

void KrilConfig::validate() const {
  if (group_size == 0) throw ValidationError("group_size H must be at least 1");
  decoder.validate();
  if (decoder.latent_dim != 2 * group_size) throw ValidationError("decoder latent_dim must equal 2H");
  recorder.validate();
  if (recorder.weight_decay != 0.0) throw ValidationError("recorder weight_decay must be 0");
  base.validate();
  incremental.validate();
  if (lambda < 0.0) throw ValidationError("lambda must be non-negative");
  if (!(backbone_lr_scale > 0.0) || backbone_lr_scale > 1.0) {
    throw ValidationError("backbone_lr_scale must lie in (0, 1]");
  }
}

nlohmann::ordered_json KrilConfig::to_json() const {
  nlohmann::ordered_json j;
  j["group_size"] = group_size;
  j["decoder"] = decoder.to_json();
  j["recorder"] = recorder.to_json();
  j["base"] = base.to_json();
  j["incremental"] = incremental.to_json();
  j["lambda"] = lambda;
  j["backbone_lr_scale"] = backbone_lr_scale;
  j["double_krnet"] = double_krnet;
  j["use_aux_loss"] = use_aux_loss;
  j["use_kr2_loss"] = use_kr2_loss;
  j["inherit_norm_stats"] = inherit_norm_stats;
  j["train_final_recorder"] = train_final_recorder;
  j["replay"] = to_string(replay);
  j["seed"] = seed;
  return j;
}

KrilConfig KrilConfig::from_json(const nlohmann::json& j) {
  KrilConfig c;
  c.group_size = j.at("group_size").get<std::size_t>();
  c.decoder = DecoderConfig::from_json(j.at("decoder"));
  c.recorder = RecorderTrainConfig::from_json(j.at("recorder"));
  c.base = ClassifierTrainConfig::from_json(j.at("base"));
  c.incremental = ClassifierTrainConfig::from_json(j.at("incremental"));
  c.lambda = j.at("lambda").get<double>();
  c.backbone_lr_scale = j.at("backbone_lr_scale").get<double>();
  c.double_krnet = j.at("double_krnet").get<bool>();
  c.use_aux_loss = j.at("use_aux_loss").get<bool>();
  c.use_kr2_loss = j.at("use_kr2_loss").get<bool>();
  c.inherit_norm_stats = j.at("inherit_norm_stats").get<bool>();
  c.train_final_recorder = j.at("train_final_recorder").get<bool>();
  c.replay = replay_mode_from(j.at("replay").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------- loss

template <typename T>
IncLoss<T> incremental_loss(const Tensor<T>& logits, std::span<const std::size_t> labels, const Tensor<T>& embedding,
                            const Tensor<T>* previous, std::span<const std::uint8_t> replay_mask, double lambda) {
  if (lambda < 0.0) throw ValidationError("lambda must be non-negative");
  const std::size_t batch = logits.rank() == 2 ? logits.dim(0) : 0;
  if (embedding.rank() == 0 || embedding.dim(0) != batch) {
    throw ValidationError("embedding rows do not match the logits batch");
  }
  if (!replay_mask.empty() && replay_mask.size() != batch) throw ValidationError("replay mask has the wrong length");
  auto ce = nn::softmax_cross_entropy(logits, labels);
  IncLoss<T> out;
  out.cls = ce.value;
  out.grad_logits = std::move(ce.grad);
  out.grad_embedding = Tensor<T>(embedding.shape());
  const bool any_replayed = std::any_of(replay_mask.begin(), replay_mask.end(), [](std::uint8_t m) { return m != 0; });
  if (any_replayed) {
    if (previous == nullptr) throw ValidationError("replayed rows need the previous task learner");
    if (previous->shape() != embedding.shape()) throw ValidationError("previous embedding has the wrong shape");
    auto aux = nn::batch_squared_error(embedding, *previous, replay_mask);
    out.aux = aux.value;
    const T scale = static_cast<T>(lambda);
    for (std::size_t i = 0; i < aux.grad.size(); ++i) out.grad_embedding[i] = scale * aux.grad[i];
  }
  out.total = out.cls + static_cast<T>(lambda) * out.aux;
  return out;
}

template IncLoss<float> incremental_loss<float>(const Tensor<float>&, std::span<const std::size_t>,
                                                const Tensor<float>&, const Tensor<float>*,
                                                std::span<const std::uint8_t>, double);
template IncLoss<double> incremental_loss<double>(const Tensor<double>&, std::span<const std::size_t>,
                                                  const Tensor<double>&, const Tensor<double>*,
                                                  std::span<const std::uint8_t>, double);

std::vector<double> KrilResult::curve() const {
  std::vector<double> out;
  for (const auto& s : steps) out.push_back(s.accuracy);
  return out;
}

// ---------------------------------------------------------------- helpers

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::size_t> class_indices(std::span<const ClassLabel> labels, std::span<const ClassLabel> class_order) {
  std::unordered_map<ClassLabel, std::size_t> index;
  for (std::size_t k = 0; k < class_order.size(); ++k) index[class_order[k]] = k;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = index.find(labels[i]);
    if (it == index.end()) throw ValidationError("label " + std::to_string(labels[i]) + " is not a seen class");
    out[i] = it->second;
  }
  return out;
}

Tensor<float> chunked_infer(const nn::Module<float>& module, const Tensor<float>& x) {
  constexpr std::size_t kChunk = 256;
  Tensor<float> out;
  const std::size_t row = x.row_size();
  for (std::size_t start = 0; start < x.dim(0); start += kChunk) {
    const std::size_t count = std::min(kChunk, x.dim(0) - start);
    Shape shape = x.shape();
    shape[0] = count;
    const Tensor<float> y =
        module.infer(Tensor<float>(shape, std::vector<float>(x.data() + start * row, x.data() + (start + count) * row)));
    if (out.empty()) {
      Shape full = y.shape();
      full[0] = x.dim(0);
      out = Tensor<float>(full);
    }
    std::copy(y.storage().begin(), y.storage().end(), out.data() + start * y.row_size());
  }
  return out;
}

template <typename Params>
void append(std::vector<nn::Parameter<float>*>& out, Params&& more) {
  out.insert(out.end(), more.begin(), more.end());
}

struct LearnerLosses {
  double cls = 0.0;
  double aux = 0.0;
};

// One increment of F2 training on fixed features.
LearnerLosses train_task_learner(SplitBackbone& model, const Tensor<float>& features,
                                 const std::vector<std::size_t>& targets, const std::vector<std::uint8_t>& mask,
                                 const Tensor<float>* previous_embedding, double lambda,
                                 const ClassifierTrainConfig& config, double backbone_scale, std::uint64_t seed) {
  const std::size_t n = targets.size();
  nn::Sgd<float> sgd({{model.f2_features().parameters(), backbone_scale}, {model.classifier().parameters(), 1.0}},
                     config.momentum, config.weight_decay);
  nn::Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  LearnerLosses last;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LearnerLosses sum;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - start);
      const std::span<const std::size_t> rows(order.data() + start, count);
      std::vector<std::size_t> labels(count);
      std::vector<std::uint8_t> batch_mask(count);
      for (std::size_t i = 0; i < count; ++i) {
        labels[i] = targets[rows[i]];
        batch_mask[i] = mask[rows[i]];
      }
      const Tensor<float> x = gather_rows(features, rows);
      Tensor<float> prev;
      if (previous_embedding != nullptr) prev = gather_rows(*previous_embedding, rows);
      sgd.zero_grad();
      const Tensor<float> e = model.f2_features().forward(x);
      const Tensor<float> logits = model.classifier().forward(e);
      const auto loss = incremental_loss<float>(logits, labels, e, previous_embedding ? &prev : nullptr,
                                                previous_embedding ? std::span<const std::uint8_t>(batch_mask)
                                                                   : std::span<const std::uint8_t>(),
                                                lambda);
      if (!std::isfinite(loss.total)) throw RuntimeFailure("task learner loss became non-finite");
      Tensor<float> g = model.classifier().backward(loss.grad_logits);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += loss.grad_embedding[i];
      model.f2_features().backward(g);
      sgd.step(config.lr_at(epoch));
      sum.cls += loss.cls;
      sum.aux += loss.aux;
      ++batches;
    }
    last.cls = sum.cls / static_cast<double>(batches);
    last.aux = sum.aux / static_cast<double>(batches);
  }
  return last;
}

double features_mse(const FeatureCorpus& replayed, const FeatureCorpus& real) {
  std::unordered_map<SampleId, std::size_t> row;
  for (std::size_t i = 0; i < real.size(); ++i) row[real.ids[i]] = i;
  const std::size_t d = real.features.row_size();
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < replayed.size(); ++i) {
    const auto it = row.find(replayed.ids[i]);
    if (it == row.end()) continue;
    const float* a = replayed.features.data() + i * d;
    const float* b = real.features.data() + it->second * d;
    for (std::size_t k = 0; k < d; ++k) acc += (double(a[k]) - b[k]) * (double(a[k]) - b[k]);
    count += d;
  }
  return count ? acc / static_cast<double>(count) : 0.0;
}

std::unique_ptr<nn::Sequential<float>> frozen_copy(const nn::Sequential<float>& net) {
  auto copy = std::make_unique<nn::Sequential<float>>(net);
  copy->set_frozen(true);
  return copy;
}

}  // namespace

// ---------------------------------------------------------------- evaluation

double evaluate_features(const SplitBackbone& model, const Tensor<float>& features, std::span<const ClassLabel> labels,
                         std::span<const ClassLabel> class_order) {
  if (labels.empty()) throw ValidationError("cannot evaluate on an empty test set");
  const auto targets = class_indices(labels, class_order);
  const auto pred = nn::argmax_rows(model.logits(features));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) correct += pred[i] == targets[i];
  return static_cast<double>(correct) / static_cast<double>(targets.size());
}

double evaluate(const SplitBackbone& model, const experiment::ImageSet& test, std::span<const ClassLabel> class_order) {
  if (test.size() == 0) throw ValidationError("cannot evaluate on an empty test set");
  return evaluate_features(model, model.extract(test.images), test.labels, class_order);
}

// ---------------------------------------------------------------- base training

SplitBackbone train_backbone(const experiment::ImageSet& train, std::span<const ClassLabel> classes,
                             const BackboneSpec& spec, const ClassifierTrainConfig& config, std::uint64_t seed,
                             double* final_loss) {
  config.validate();
  const experiment::ImageSet data = train.filter_classes(classes);
  if (data.size() == 0) throw ValidationError("no training images for the requested classes");
  const auto targets = class_indices(data.labels, classes);
  SplitBackbone model(spec, classes.size(), seed);
  std::vector<nn::Parameter<float>*> params;
  append(params, model.f1().parameters());
  append(params, model.f2_features().parameters());
  append(params, model.classifier().parameters());
  nn::Sgd<float> sgd({{params, 1.0}}, config.momentum, config.weight_decay);
  nn::Rng rng(seed ^ 0xba5eULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  double loss_sum = 0.0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      const std::span<const std::size_t> rows(order.data() + start, count);
      Tensor<float> x = gather_rows(data.images, rows);
      if (config.augment_pad > 0) experiment::augment_pad_crop_flip(x, config.augment_pad, rng);
      std::vector<std::size_t> labels(count);
      for (std::size_t i = 0; i < count; ++i) labels[i] = targets[rows[i]];
      sgd.zero_grad();
      const Tensor<float> logits =
          model.classifier().forward(model.f2_features().forward(model.f1().forward(x)));
      const auto loss = nn::softmax_cross_entropy(logits, std::span<const std::size_t>(labels));
      if (!std::isfinite(loss.value)) throw RuntimeFailure("backbone loss became non-finite");
      model.f1().backward(model.f2_features().backward(model.classifier().backward(loss.grad)));
      sgd.step(config.lr_at(epoch));
      loss_sum += loss.value;
      ++batches;
    }
    loss_sum /= static_cast<double>(batches);
  }
  if (final_loss != nullptr) *final_loss = loss_sum;
  return model;
}

void save_task_learner(const SplitBackbone& model, std::span<const ClassLabel> class_order,
                       const std::filesystem::path& path) {
  Archive archive;
  archive.add_json("backbone.json", model.spec().to_json());
  archive.add_json("class_order.json", nlohmann::ordered_json(std::vector<ClassLabel>(class_order.begin(), class_order.end())));
  std::vector<const nn::Parameter<float>*> params;
  for (const auto* p : model.f2_features().parameters()) params.push_back(p);
  for (const auto* p : model.classifier().parameters()) params.push_back(p);
  store_weights<float>(archive, params);
  archive.write(path);
}

// ---------------------------------------------------------------- pipeline

KrilResult run_kril(const experiment::ImageDataset& data, const TaskSequence& tasks, const BackboneSpec& spec,
                    const KrilConfig& config, const SplitBackbone* base, experiment::FeatureCache* cache,
                    const RunPaths& paths) {
  tasks.validate();
  spec.validate();
  config.validate();
  if (config.decoder.target != split_feature_shape(spec)) {
    throw ValidationError("recorder target " + config.decoder.target.to_string() + " does not match the F1 output " +
                          split_feature_shape(spec).to_string());
  }
  experiment::FeatureCache local_cache;
  if (cache == nullptr) cache = &local_cache;
  if (!paths.checkpoints.empty()) std::filesystem::create_directories(paths.checkpoints);

  KrilResult result;
  result.method = config.replay == ReplayMode::kRecorder ? "kril" : config.replay == ReplayMode::kOracle ? "oracle" : "fine_tune";
  result.tasks = tasks;
  const std::size_t num_tasks = tasks.tasks.size();
  auto step_start = Clock::now();

  double base_loss = 0.0;
  SplitBackbone model = base != nullptr ? *base
                                        : train_backbone(data.train, tasks.tasks[0], spec, config.base, config.seed,
                                                         &base_loss);
  if (model.num_classes() != tasks.tasks[0].size()) {
    throw ValidationError("base model has " + std::to_string(model.num_classes()) + " outputs but task 0 has " +
                          std::to_string(tasks.tasks[0].size()) + " classes");
  }
  model.f1().set_frozen(true);
  const std::uint64_t f1_hash = nn::weight_hash(model.f1());

  std::vector<FeatureCorpus> train_features(num_tasks);
  std::vector<FeatureCorpus> test_features(num_tasks);
  for (std::size_t t = 0; t < num_tasks; ++t) {
    train_features[t] = cache->get_or_compute("train_task" + std::to_string(t), model,
                                              data.train.filter_classes(tasks.tasks[t]));
    test_features[t] =
        cache->get_or_compute("test_task" + std::to_string(t), model, data.test.filter_classes(tasks.tasks[t]));
  }

  std::vector<ClassLabel> class_order = tasks.tasks[0];
  auto evaluate_step = [&](TaskMetrics& m, std::size_t t) {
    FeatureCorpus seen;
    for (std::size_t i = 0; i <= t; ++i) {
      m.per_task_accuracy.push_back(
          evaluate_features(model, test_features[i].features, test_features[i].labels, class_order));
      seen = merge_corpora(seen, test_features[i]);
    }
    m.accuracy = evaluate_features(model, seen.features, seen.labels, class_order);
    m.classes_seen = class_order.size();
    m.f1_hash = nn::weight_hash(model.f1());
    if (m.f1_hash != f1_hash) throw RuntimeFailure("F1 weights changed during task " + std::to_string(t));
  };

  const bool use_recorder = config.replay == ReplayMode::kRecorder;
  RecorderTrainConfig recorder_config = config.recorder;
  if (!config.use_kr2_loss) recorder_config.gamma = 0.0;
  std::unique_ptr<KRNetModel<float>> recorder_a;  // base task (double) or everything (single)
  std::unique_ptr<KRNetModel<float>> recorder_b;  // increments (double only)
  std::optional<NormalizationStats> base_stats;

  auto train_recorder_on = [&](const FeatureCorpus& targets, TaskMetrics& m, std::size_t t, const std::string& tag) {
    auto head = config.use_kr2_loss ? frozen_copy(model.f2_features()) : nullptr;
    recorder_config.seed = config.seed + 101 * (t + 1);
    auto fit = fit_krnet<float>(targets, config.group_size, config.decoder, recorder_config, head.get(),
                                config.inherit_norm_stats ? base_stats : std::nullopt);
    if (!base_stats) base_stats = fit.model->norm_stats();
    m.recorder_kr1 = fit.report.log.back().kr1;
    m.recorder_kr2 = fit.report.log.back().kr2;
    m.recorder_mse_raw = fit.report.final_mse_raw;
    if (!paths.checkpoints.empty()) {
      save_krnet(*fit.model, paths.checkpoints / ("task" + std::to_string(t) + "_recorder" + tag + ".krna"));
    }
    return std::move(fit.model);
  };

  TaskMetrics m0;
  m0.task = 0;
  m0.loss_cls = base_loss;
  m0.current_rows = train_features[0].size();
  evaluate_step(m0, 0);
  if (use_recorder) recorder_a = train_recorder_on(train_features[0], m0, 0, config.double_krnet ? "_a" : "");
  if (!paths.checkpoints.empty()) save_task_learner(model, class_order, paths.checkpoints / "task0_f2.krna");
  m0.seconds = seconds_since(step_start);
  result.steps.push_back(m0);

  FeatureCorpus old_real = train_features[0];
  for (std::size_t t = 1; t < num_tasks; ++t) {
    step_start = Clock::now();
    TaskMetrics m;
    m.task = t;
    FeatureCorpus replayed;
    if (use_recorder) {
      replayed = replay_corpus(*recorder_a);
      if (config.double_krnet && recorder_b) replayed = merge_corpora(replayed, replay_corpus(*recorder_b));
      m.replay_mse = features_mse(replayed, old_real);
    } else if (config.replay == ReplayMode::kOracle) {
      replayed = old_real;
    }
    const FeatureCorpus& current = train_features[t];
    class_order.insert(class_order.end(), tasks.tasks[t].begin(), tasks.tasks[t].end());
    model.grow_classes(tasks.tasks[t].size());

    const auto previous = frozen_copy(model.f2_features());
    m.previous_f2_hash_before = nn::weight_hash(*previous);
    const FeatureCorpus mixed = merge_corpora(replayed, current);
    std::vector<std::uint8_t> mask(mixed.size(), 0);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(replayed.size()), 1);
    const bool aux = config.use_aux_loss && config.lambda > 0.0 && replayed.size() > 0;
    Tensor<float> previous_embedding;
    if (aux) previous_embedding = chunked_infer(*previous, mixed.features);
    const auto losses = train_task_learner(model, mixed.features, class_indices(mixed.labels, class_order), mask,
                                           aux ? &previous_embedding : nullptr, aux ? config.lambda : 0.0,
                                           config.incremental, config.backbone_lr_scale, config.seed + 7 * t);
    m.previous_f2_hash_after = nn::weight_hash(*previous);
    m.loss_cls = losses.cls;
    m.loss_aux = losses.aux;
    m.current_rows = current.size();
    m.replayed_rows = replayed.size();
    evaluate_step(m, t);

    const bool last = t + 1 == num_tasks;
    if (use_recorder && (!last || config.train_final_recorder)) {
      if (config.double_krnet) {
        recorder_b = train_recorder_on(self_taught_targets(recorder_b.get(), current), m, t, "_b");
      } else {
        recorder_a = train_recorder_on(self_taught_targets(recorder_a.get(), current), m, t, "");
      }
    }
    if (!paths.checkpoints.empty()) {
      save_task_learner(model, class_order, paths.checkpoints / ("task" + std::to_string(t) + "_f2.krna"));
    }
    old_real = merge_corpora(old_real, current);
    m.seconds = seconds_since(step_start);
    result.steps.push_back(m);
  }
  return result;
}

BaselineBounds baseline_bounds(const experiment::ImageDataset& data, const TaskSequence& tasks,
                               const BackboneSpec& spec, const KrilConfig& config, const SplitBackbone* base,
                               experiment::FeatureCache* cache) {
  tasks.validate();
  std::optional<SplitBackbone> own_base;
  if (base == nullptr) {
    own_base.emplace(train_backbone(data.train, tasks.tasks[0], spec, config.base, config.seed));
    base = &*own_base;
  }
  BaselineBounds out;
  out.joint.method = "joint";
  out.joint.tasks = tasks;
  for (std::size_t t = 0; t < tasks.tasks.size(); ++t) {
    const auto start = Clock::now();
    const auto seen = tasks.seen_classes(t);
    TaskMetrics m;
    m.task = t;
    const SplitBackbone model =
        t == 0 ? *base : train_backbone(data.train, seen, spec, config.base, config.seed, &m.loss_cls);
    for (std::size_t i = 0; i <= t; ++i) {
      m.per_task_accuracy.push_back(evaluate(model, data.test.filter_classes(tasks.tasks[i]), seen));
    }
    m.accuracy = evaluate(model, data.test.filter_classes(seen), seen);
    m.classes_seen = seen.size();
    m.current_rows = data.train.filter_classes(seen).size();
    m.f1_hash = nn::weight_hash(model.f1());
    m.seconds = seconds_since(start);
    out.joint.steps.push_back(m);
  }
  KrilConfig ft = config;
  ft.replay = ReplayMode::kNone;
  ft.use_aux_loss = false;
  out.fine_tune = run_kril(data, tasks, spec, ft, base, cache);
  KrilConfig oracle = config;
  oracle.replay = ReplayMode::kOracle;
  out.oracle = run_kril(data, tasks, spec, oracle, base, cache);
  return out;
}

void write_metrics_csv(const std::vector<const KrilResult*>& results, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << "method,task,classes_seen,accuracy,loss_cls,loss_aux,current_rows,replayed_rows,replay_mse,recorder_kr1,"
         "recorder_kr2,recorder_mse_raw,f1_hash,previous_f2_hash_before,previous_f2_hash_after,per_task_accuracy\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  auto hex = [&](std::uint64_t v) {
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
  };
  for (const KrilResult* r : results) {
    for (const auto& m : r->steps) {
      out << r->method << ',' << m.task << ',' << m.classes_seen << ',' << num(m.accuracy) << ',' << num(m.loss_cls)
          << ',' << num(m.loss_aux) << ',' << m.current_rows << ',' << m.replayed_rows << ',' << num(m.replay_mse)
          << ',' << num(m.recorder_kr1) << ',' << num(m.recorder_kr2) << ',' << num(m.recorder_mse_raw) << ','
          << hex(m.f1_hash) << ',' << hex(m.previous_f2_hash_before) << ',' << hex(m.previous_f2_hash_after) << ',';
      for (std::size_t i = 0; i < m.per_task_accuracy.size(); ++i) {
        out << (i ? ";" : "") << num(m.per_task_accuracy[i]);
      }
      out << '\n';
    }
  }
}

}  // namespace krnet::kril
