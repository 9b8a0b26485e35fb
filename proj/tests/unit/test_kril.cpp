// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "krnet/experiment/feature_cache.hpp"
#include "krnet/kril/kril.hpp"
#include "krnet/nn/loss.hpp"
#include "test_util.hpp"

using namespace krnet;
using namespace krnet::kril;
using krnet::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

std::vector<ClassLabel> range(std::size_t n) {
  std::vector<ClassLabel> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<ClassLabel>(i);
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("krnet_kril_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

experiment::ImageDataset small_images() {
  experiment::SyntheticImageSpec spec;
  spec.classes = 4;
  spec.train_per_class = 12;
  spec.test_per_class = 6;
  return experiment::make_synthetic_images(spec);
}

KrilConfig small_config() {
  KrilConfig c;
  c.group_size = 64;
  c.decoder = DecoderConfig::desk();
  c.decoder.c0 = 8;
  c.decoder.c1 = 4;
  c.recorder.batch_size = 8;
  c.recorder.warm_iters = 10;
  c.recorder.decay_iters = 10;
  c.recorder.log_every = 10;
  c.base.epochs = 3;
  c.base.batch_size = 16;
  c.incremental = c.base;
  return c;
}

}  // namespace

TEST_CASE("task sequences split half the classes into the base task") {
  const auto ten = make_task_sequence(range(10), 2, 0);
  REQUIRE(ten.tasks.size() == 3);
  CHECK(ten.tasks[0].size() == 5);
  CHECK(ten.tasks[1].size() == 3);
  CHECK(ten.tasks[2].size() == 2);
  CHECK(ten.num_increments() == 2);
  std::set<ClassLabel> all;
  for (const auto& t : ten.tasks) all.insert(t.begin(), t.end());
  CHECK(all.size() == 10);
  CHECK(ten.seen_classes(1).size() == 8);

  const auto cifar5 = make_task_sequence(range(100), 5, 1993);
  CHECK(cifar5.tasks[0].size() == 50);
  for (std::size_t t = 1; t <= 5; ++t) CHECK(cifar5.tasks[t].size() == 10);
  const auto cifar10 = make_task_sequence(range(100), 10, 1993);
  for (std::size_t t = 1; t <= 10; ++t) CHECK(cifar10.tasks[t].size() == 5);

  CHECK(make_task_sequence(range(10), 2, 4).to_json() == make_task_sequence(range(10), 2, 4).to_json());
  CHECK(make_task_sequence(range(10), 2, 4).to_json() != make_task_sequence(range(10), 2, 5).to_json());
  CHECK_THROWS_AS(make_task_sequence(range(4), 3, 0), ValidationError);
  TaskSequence bad{{{0, 1}, {1}}};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("backbone splits and layer counts") {
  const auto r32 = BackboneSpec::resnet32_cifar(11);
  CHECK(split_feature_shape(r32) == FeatureShape{64, 8, 8});
  SplitBackbone cifar(r32, 50, 1);
  CHECK(cifar.f1_layer_count() == 23);
  CHECK(cifar.f2_layer_count() == 9);
  CHECK(cifar.embedding_dim() == 64);
  SplitBackbone deeper(BackboneSpec::resnet32_cifar(13), 50, 1);
  CHECK(deeper.f1_layer_count() == 27);
  CHECK(split_feature_shape(BackboneSpec::resnet18(6)) == FeatureShape{256, 14, 14});
  CHECK(split_feature_shape(BackboneSpec::desk(3)) == FeatureShape{16, 4, 4});
  CHECK(split_feature_shape(BackboneSpec::desk(2)) == FeatureShape{16, 8, 8});
  CHECK(split_feature_shape(BackboneSpec::desk(4)) == FeatureShape{32, 2, 2});
  CHECK_THROWS_AS(BackboneSpec::desk(6).validate(), ValidationError);

  SplitBackbone desk(BackboneSpec::desk(3), 3, 2);
  const auto x = random_tensor<float>({2, 3, 16, 16}, 3, 0.0, 1.0);
  const auto f = desk.extract(x);
  CHECK(f.shape() == Shape{2, 16, 4, 4});
  CHECK(desk.logits(f).shape() == Shape{2, 3});
  desk.grow_classes(2);
  CHECK(desk.num_classes() == 5);
  CHECK(desk.logits(f).shape() == Shape{2, 5});
}

TEST_CASE("resnet18 split matches its published layer counts") {
  SplitBackbone r18(BackboneSpec::resnet18(6), 50, 1);
  CHECK(r18.f1_layer_count() == 13);
  CHECK(r18.f2_layer_count() == 5);
  CHECK(r18.feature_shape() == FeatureShape{256, 14, 14});
}

TEST_CASE("backbone checkpoint round trip") {
  const auto dir = scratch("backbone");
  SplitBackbone a(BackboneSpec::desk(3), 4, 9);
  save_backbone(a, dir / "b.krna");
  const auto b = load_backbone(dir / "b.krna");
  CHECK(nn::weight_hash(b.f1()) == nn::weight_hash(a.f1()));
  CHECK(nn::weight_hash(b.f2_features()) == nn::weight_hash(a.f2_features()));
  CHECK(b.num_classes() == 4);
  const auto x = random_tensor<float>({3, 3, 16, 16}, 4, 0.0, 1.0);
  CHECK(testing::max_abs_diff(a.logits(a.extract(x)), b.logits(b.extract(x))) == 0.0);
}

TEST_CASE("auxiliary loss gradient is exactly zero on a replay-free batch") {
  const auto logits = random_tensor<double>({4, 3}, 1);
  const auto e = random_tensor<double>({4, 5}, 2);
  const auto prev = random_tensor<double>({4, 5}, 3);
  const std::vector<std::size_t> labels{0, 2, 1, 1};
  const std::vector<std::uint8_t> none(4, 0);
  const auto l = incremental_loss<double>(logits, labels, e, &prev, none, 2.0);
  CHECK(l.aux == 0.0);
  for (double g : l.grad_embedding.storage()) REQUIRE(g == 0.0);
}

TEST_CASE("incremental loss with lambda 0 is plain cross-entropy") {
  const auto logits = random_tensor<double>({4, 3}, 4);
  const auto e = random_tensor<double>({4, 5}, 5);
  const auto prev = random_tensor<double>({4, 5}, 6);
  const std::vector<std::size_t> labels{0, 2, 1, 1};
  const std::vector<std::uint8_t> mask{1, 0, 1, 1};
  const auto l = incremental_loss<double>(logits, labels, e, &prev, mask, 0.0);
  const auto ce = nn::softmax_cross_entropy(logits, std::span<const std::size_t>(labels));
  CHECK(l.total == ce.value);
  CHECK(testing::max_abs_diff(l.grad_logits, ce.grad) == 0.0);
  for (double g : l.grad_embedding.storage()) REQUIRE(g == 0.0);
}

TEST_CASE("auxiliary term averages over the full batch and touches replayed rows only") {
  Tensor<double> e({4, 2}, {1, 1, 0, 0, 2, 0, 5, 5});
  Tensor<double> prev({4, 2}, {0, 1, 0, 0, 0, 0, 0, 0});
  const auto logits = random_tensor<double>({4, 2}, 7);
  const std::vector<std::size_t> labels{0, 1, 0, 1};
  const std::vector<std::uint8_t> mask{1, 1, 1, 0};
  const auto l = incremental_loss<double>(logits, labels, e, &prev, mask, 2.0);
  // replayed squared distances 1 + 0 + 4 over B = 4
  CHECK(l.aux == doctest::Approx(5.0 / 4.0));
  CHECK(l.total == doctest::Approx(l.cls + 2.0 * 5.0 / 4.0));
  CHECK(l.grad_embedding[0] == doctest::Approx(2.0 * 2.0 * 1.0 / 4.0));
  CHECK(l.grad_embedding[6] == 0.0);
  CHECK(l.grad_embedding[7] == 0.0);
  CHECK_THROWS_AS(incremental_loss<double>(logits, labels, e, nullptr, mask, 2.0), ValidationError);
}

TEST_CASE("incremental loss gradients match finite differences") {
  auto logits = random_tensor<double>({5, 4}, 8);
  auto e = random_tensor<double>({5, 3}, 9);
  const auto prev = random_tensor<double>({5, 3}, 10);
  const std::vector<std::size_t> labels{3, 0, 1, 1, 2};
  const std::vector<std::uint8_t> mask{1, 0, 1, 0, 1};
  const auto l = incremental_loss<double>(logits, labels, e, &prev, mask, 2.0);
  auto total = [&] { return incremental_loss<double>(logits, labels, e, &prev, mask, 2.0).total; };
  CHECK(testing::check_input_gradient(logits, l.grad_logits, total).max_rel_error < 1e-6);
  CHECK(testing::check_input_gradient(e, l.grad_embedding, total).max_rel_error < 1e-6);
}

TEST_CASE("classifier schedule and config JSON") {
  ClassifierTrainConfig c;
  c.lr_milestones = {80, 120};
  CHECK(c.lr_at(0) == 0.1);
  CHECK(c.lr_at(80) == doctest::Approx(0.01));
  CHECK(c.lr_at(159) == doctest::Approx(0.001));
  const auto k = small_config();
  const auto j = k.to_json();
  CHECK(KrilConfig::from_json(nlohmann::json::parse(j.dump())).to_json() == j);
  auto bad = k;
  bad.decoder.latent_dim = 64;
  bad.decoder.d0 = 64;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = k;
  bad.recorder.weight_decay = 1e-4;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("feature cache hits skip F1 and persist identical bytes") {
  const auto dir = scratch("cache");
  const auto data = small_images();
  SplitBackbone model(BackboneSpec::desk(3), 2, 3);
  experiment::FeatureCache cache(dir);
  const auto a = cache.get_or_compute("train", model, data.train);
  const auto b = cache.get_or_compute("train", model, data.train);
  CHECK(cache.misses() == 1);
  CHECK(cache.hits() == 1);
  CHECK(testing::max_abs_diff(a.features, b.features) == 0.0);
  CHECK(a.feature_shape() == FeatureShape{16, 4, 4});

  experiment::FeatureCache reopened(dir);
  const auto c = reopened.get_or_compute("train", model, data.train);
  CHECK(reopened.hits() == 1);
  CHECK(reopened.misses() == 0);
  CHECK(testing::max_abs_diff(a.features, c.features) == 0.0);
  CHECK(fs::exists(dir / "manifest.json"));

  SplitBackbone other(BackboneSpec::desk(3), 2, 4);
  reopened.get_or_compute("train", other, data.train);
  CHECK(reopened.misses() == 1);
}

TEST_CASE("KRIL run keeps F1 and the previous F2 frozen and replays every old sample") {
  const auto data = small_images();
  const auto tasks = make_task_sequence(range(4), 1, 0);
  const auto spec = BackboneSpec::desk(3);
  const auto config = small_config();
  const auto dir = scratch("run");
  const auto result = run_kril(data, tasks, spec, config, nullptr, nullptr, {dir});
  REQUIRE(result.steps.size() == 2);
  CHECK(result.method == "kril");
  const auto& s0 = result.steps[0];
  const auto& s1 = result.steps[1];
  CHECK(s0.classes_seen == 2);
  CHECK(s1.classes_seen == 4);
  CHECK(s1.f1_hash == s0.f1_hash);
  CHECK(s1.previous_f2_hash_before == s1.previous_f2_hash_after);
  CHECK(s1.replayed_rows == 24);
  CHECK(s1.current_rows == 24);
  CHECK(s1.loss_aux > 0.0);
  CHECK(s1.per_task_accuracy.size() == 2);
  CHECK(fs::exists(dir / "task0_recorder_a.krna"));
  CHECK(fs::exists(dir / "task1_recorder_b.krna"));
  CHECK(fs::exists(dir / "task1_f2.krna"));

  auto single = config;
  single.double_krnet = false;
  single.train_final_recorder = false;
  const auto r_single = run_kril(data, tasks, spec, single);
  CHECK(r_single.steps[1].replayed_rows == 24);
  CHECK(r_single.steps[1].recorder_kr1 == 0.0);

  auto none = config;
  none.replay = ReplayMode::kNone;
  none.use_aux_loss = false;
  const auto ft = run_kril(data, tasks, spec, none);
  CHECK(ft.method == "fine_tune");
  CHECK(ft.steps[1].replayed_rows == 0);
  CHECK(ft.steps[1].loss_aux == 0.0);
}

TEST_CASE("KRIL metrics are reproducible and written without timing") {
  const auto data = small_images();
  const auto tasks = make_task_sequence(range(4), 1, 1);
  auto config = small_config();
  config.replay = ReplayMode::kOracle;
  const auto a = run_kril(data, tasks, BackboneSpec::desk(3), config);
  const auto b = run_kril(data, tasks, BackboneSpec::desk(3), config);
  const auto dir = scratch("metrics");
  write_metrics_csv({&a}, dir / "a.csv");
  write_metrics_csv({&b}, dir / "b.csv");
  std::ifstream fa(dir / "a.csv"), fb(dir / "b.csv");
  const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(sa == sb);
  CHECK(sa.rfind("method,task,classes_seen,accuracy,", 0) == 0);
  CHECK(a.method == "oracle");
}

TEST_CASE("joint bound retrains on every seen class") {
  const auto data = small_images();
  const auto tasks = make_task_sequence(range(4), 1, 0);
  const auto b = baseline_bounds(data, tasks, BackboneSpec::desk(3), small_config());
  CHECK(b.joint.method == "joint");
  CHECK(b.joint.steps.size() == 2);
  CHECK(b.joint.steps[1].current_rows == 48);
  CHECK(b.oracle.steps[1].replayed_rows == 24);
  CHECK(b.fine_tune.steps[1].replayed_rows == 0);
}
