// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/experiment/config.hpp"

#include <cstdlib>
#include <fstream>

namespace krnet::experiment {

std::string to_string(Scale scale) { return scale == Scale::kDesk ? "desk" : "paper"; }

Scale parse_scale(const std::string& s) {
  if (s == "desk") return Scale::kDesk;
  if (s == "paper") return Scale::kPaper;
  throw ValidationError("unknown scale '" + s + "' (expected desk or paper)");
}

namespace {

nlohmann::ordered_json shape_json(const FeatureShape& s) { return {s.channels, s.height, s.width}; }

FeatureShape shape_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<std::size_t>>();
  if (v.size() != 3) throw ValidationError("feature shape must list [c, h, w]");
  return {v[0], v[1], v[2]};
}

nlohmann::ordered_json synthetic_images_json(const SyntheticImageSpec& s) {
  nlohmann::ordered_json j;
  j["classes"] = s.classes;
  j["train_per_class"] = s.train_per_class;
  j["test_per_class"] = s.test_per_class;
  j["channels"] = s.channels;
  j["size"] = s.size;
  j["noise"] = s.noise;
  j["max_shift"] = s.max_shift;
  j["seed"] = s.seed;
  return j;
}

SyntheticImageSpec synthetic_images_from(const nlohmann::json& j) {
  SyntheticImageSpec s;
  s.classes = j.at("classes").get<std::size_t>();
  s.train_per_class = j.at("train_per_class").get<std::size_t>();
  s.test_per_class = j.at("test_per_class").get<std::size_t>();
  s.channels = j.at("channels").get<std::size_t>();
  s.size = j.at("size").get<std::size_t>();
  s.noise = j.at("noise").get<double>();
  s.max_shift = j.at("max_shift").get<std::size_t>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

nlohmann::ordered_json synthetic_features_json(const SyntheticFeatureSpec& s) {
  nlohmann::ordered_json j;
  j["samples"] = s.samples;
  j["classes"] = s.classes;
  j["shape"] = shape_json(s.shape);
  j["rank"] = s.rank;
  j["class_spread"] = s.class_spread;
  j["sample_spread"] = s.sample_spread;
  j["noise"] = s.noise;
  j["zero_fraction"] = s.zero_fraction;
  j["seed"] = s.seed;
  return j;
}

SyntheticFeatureSpec synthetic_features_from(const nlohmann::json& j) {
  SyntheticFeatureSpec s;
  s.samples = j.at("samples").get<std::size_t>();
  s.classes = j.at("classes").get<std::size_t>();
  s.shape = shape_from(j.at("shape"));
  s.rank = j.at("rank").get<std::size_t>();
  s.class_spread = j.at("class_spread").get<double>();
  s.sample_spread = j.at("sample_spread").get<double>();
  s.noise = j.at("noise").get<double>();
  s.zero_fraction = j.at("zero_fraction").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

}  // namespace

void DatasetSpec::validate() const {
  if (name == "synthetic-images") {
    if (synthetic.size != image_size) throw ValidationError("synthetic image size must equal dataset.image_size");
    if (synthetic.classes < 2) throw ValidationError("synthetic dataset needs at least two classes");
  } else if (name == "cifar100") {
    if (image_size != 32) throw ValidationError("cifar100 images are 32x32");
  } else if (name == "imagenet-subset") {
    if (subset_classes == 0) throw ValidationError("imagenet-subset needs subset_classes > 0");
  } else {
    throw ValidationError("unknown dataset '" + name + "' (expected synthetic-images, cifar100 or imagenet-subset)");
  }
}

nlohmann::ordered_json DatasetSpec::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["root"] = root.string();
  j["image_size"] = image_size;
  j["subset_classes"] = subset_classes;
  j["subset_seed"] = subset_seed;
  j["max_per_class"] = max_per_class;
  j["synthetic"] = synthetic_images_json(synthetic);
  return j;
}

DatasetSpec DatasetSpec::from_json(const nlohmann::json& j) {
  DatasetSpec s;
  s.name = j.at("name").get<std::string>();
  s.root = j.at("root").get<std::string>();
  s.image_size = j.at("image_size").get<std::size_t>();
  s.subset_classes = j.at("subset_classes").get<std::size_t>();
  s.subset_seed = j.at("subset_seed").get<std::uint64_t>();
  s.max_per_class = j.at("max_per_class").get<std::size_t>();
  s.synthetic = synthetic_images_from(j.at("synthetic"));
  return s;
}

nlohmann::ordered_json CorpusSpec::to_json() const {
  nlohmann::ordered_json j;
  j["features"] = synthetic_features_json(features);
  j["train"] = train.to_json();
  j["ae_latent_dim"] = ae_latent_dim;
  return j;
}

CorpusSpec CorpusSpec::from_json(const nlohmann::json& j) {
  CorpusSpec s;
  s.features = synthetic_features_from(j.at("features"));
  s.train = RecorderTrainConfig::from_json(j.at("train"));
  s.ae_latent_dim = j.at("ae_latent_dim").get<std::size_t>();
  return s;
}

nlohmann::ordered_json StorageSpec::to_json() const {
  nlohmann::ordered_json j;
  j["group_size"] = group_size;
  j["feature_shape"] = shape_json(feature_shape);
  j["ae_latent_dim"] = ae_latent_dim;
  j["decoder"] = decoder.to_json();
  return j;
}

StorageSpec StorageSpec::from_json(const nlohmann::json& j) {
  StorageSpec s;
  s.group_size = j.at("group_size").get<std::size_t>();
  s.feature_shape = shape_from(j.at("feature_shape"));
  s.ae_latent_dim = j.at("ae_latent_dim").get<std::size_t>();
  s.decoder = DecoderConfig::from_json(j.at("decoder"));
  return s;
}

void ExperimentConfig::validate() const {
  dataset.validate();
  backbone.validate();
  kril.validate();
  corpus.train.validate();
  if (tasks == 0) throw ValidationError("tasks must be at least 1");
  if (backbone.image_size != dataset.image_size) {
    throw ValidationError("backbone expects " + std::to_string(backbone.image_size) + "px images but the dataset has " +
                          std::to_string(dataset.image_size) + "px");
  }
  if (kril.decoder.target != kril::split_feature_shape(backbone)) {
    throw ValidationError("recorder target " + kril.decoder.target.to_string() + " does not match F1 output " +
                          kril::split_feature_shape(backbone).to_string());
  }
  if (storage.group_size == 0) throw ValidationError("storage.group_size must be positive");
  if (output.empty()) throw ValidationError("output directory must be set");
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["scale"] = to_string(scale);
  j["dataset"] = dataset.to_json();
  j["backbone"] = backbone.to_json();
  j["tasks"] = tasks;
  j["kril"] = kril.to_json();
  j["corpus"] = corpus.to_json();
  j["storage"] = storage.to_json();
  j["seed"] = seed;
  j["output"] = output.string();
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    c.scale = parse_scale(j.at("scale").get<std::string>());
    c.dataset = DatasetSpec::from_json(j.at("dataset"));
    c.backbone = kril::BackboneSpec::from_json(j.at("backbone"));
    c.tasks = j.at("tasks").get<std::size_t>();
    c.kril = kril::KrilConfig::from_json(j.at("kril"));
    c.corpus = CorpusSpec::from_json(j.at("corpus"));
    c.storage = StorageSpec::from_json(j.at("storage"));
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output = j.at("output").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  c.scale = Scale::kDesk;
  c.dataset.name = "synthetic-images";
  c.dataset.image_size = 16;
  c.backbone = kril::BackboneSpec::desk(3);
  c.tasks = 2;

  auto& k = c.kril;
  k.group_size = 64;
  k.decoder = DecoderConfig::desk();
  k.recorder.batch_size = 64;
  k.recorder.warm_iters = 750;
  k.recorder.decay_iters = 750;
  k.recorder.gamma = 1e-3;
  k.base.epochs = 30;
  k.base.batch_size = 128;
  k.base.lr = 0.1;
  k.base.lr_milestones = {20};
  k.incremental = k.base;
  k.train_final_recorder = false;

  c.corpus.train.batch_size = 64;
  c.corpus.train.warm_iters = 1500;
  c.corpus.train.decay_iters = 1500;
  c.corpus.train.gamma = 0.0;
  c.output = "runs/desk";
  return c;
}

ExperimentConfig ExperimentConfig::paper() {
  ExperimentConfig c;
  c.scale = Scale::kPaper;
  c.dataset.name = "cifar100";
  c.dataset.root = "data/cifar-100-binary";
  c.dataset.image_size = 32;
  c.dataset.synthetic.size = 32;
  c.backbone = kril::BackboneSpec::resnet32_cifar(11);
  c.tasks = 5;

  auto& k = c.kril;
  k.group_size = 512;
  k.decoder = DecoderConfig::cifar100();
  k.recorder = RecorderTrainConfig::cifar100();
  k.base.epochs = 160;
  k.base.batch_size = 128;
  k.base.lr = 0.1;
  k.base.lr_milestones = {80, 120};
  k.base.augment_pad = 4;
  k.incremental = k.base;
  k.incremental.epochs = 60;
  k.incremental.lr_milestones = {30, 45};
  k.incremental.augment_pad = 0;

  c.corpus.train = RecorderTrainConfig::cifar100();
  c.corpus.features.shape = {64, 8, 8};
  c.corpus.features.samples = 25000;
  c.corpus.features.classes = 50;
  c.output = "runs/paper";
  return c;
}

ExperimentConfig preset(Scale scale) { return scale == Scale::kDesk ? ExperimentConfig::desk() : ExperimentConfig::paper(); }

DecoderConfig decoder_for_features(const DecoderConfig& base, const FeatureShape& shape) {
  DecoderConfig c = base;
  c.target = shape;
  if (shape.height % c.deconv_stride != 0 || shape.width % c.deconv_stride != 0) c.deconv_stride = 1;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path, Scale scale) {
  ExperimentConfig c;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ValidationError("cannot read config " + path->string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("config " + path->string() + " is not valid JSON: " + e.what());
    }
    c = ExperimentConfig::from_json(j);
  } else {
    c = preset(scale);
  }
  if (const char* root = std::getenv("KRNET_DATA_ROOT"); root != nullptr && *root != '\0') c.dataset.root = root;
  c.validate();
  return c;
}

ImageDataset ingest_dataset(const DatasetSpec& spec, const std::filesystem::path& work_dir) {
  spec.validate();
  if (spec.name == "synthetic-images") return make_synthetic_images(spec.synthetic);
  if (spec.name == "cifar100") return load_cifar100(spec.root);
  const auto manifest_dir = work_dir / "manifest";
  if (!std::filesystem::exists(manifest_dir / "train.txt")) {
    write_imagenet_subset_manifest(spec.root, spec.subset_classes, spec.subset_seed, manifest_dir);
  }
  return load_imagenet_subset(spec.root, manifest_dir, spec.image_size, spec.max_per_class);
}

}  // namespace krnet::experiment
