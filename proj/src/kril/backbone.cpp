// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/kril/backbone.hpp"

#include <algorithm>

#include "krnet/archive.hpp"
#include "krnet/kernels/conv_geometry.hpp"
#include "krnet/krnet_model.hpp"

namespace krnet::kril {

namespace {

constexpr std::size_t kChunk = 256;

struct StemPlan {
  std::size_t channels, kernel, stride, pad;
  bool max_pool;
};

StemPlan stem_plan(const BackboneSpec& spec) {
  if (spec.arch == "resnet32") return {16, 3, 1, 1, false};
  if (spec.arch == "resnet18") return {64, 7, 2, 3, true};
  return {8, 3, 1, 1, false};
}

std::vector<BlockPlan> stages(std::size_t stem_channels, const std::vector<std::pair<std::size_t, std::size_t>>& widths) {
  std::vector<BlockPlan> out;
  std::size_t in = stem_channels;
  for (std::size_t s = 0; s < widths.size(); ++s) {
    const auto [channels, count] = widths[s];
    for (std::size_t b = 0; b < count; ++b) {
      out.push_back({in, channels, (b == 0 && s > 0) ? std::size_t{2} : std::size_t{1}});
      in = channels;
    }
  }
  return out;
}

Tensor<float> chunked(const nn::Module<float>& module, const Tensor<float>& x) {
  if (x.rank() == 0 || x.dim(0) <= kChunk) return module.infer(x);
  Tensor<float> out;
  const std::size_t row = x.row_size();
  for (std::size_t start = 0; start < x.dim(0); start += kChunk) {
    const std::size_t count = std::min(kChunk, x.dim(0) - start);
    Shape shape = x.shape();
    shape[0] = count;
    Tensor<float> part(shape, std::vector<float>(x.data() + start * row, x.data() + (start + count) * row));
    const Tensor<float> y = module.infer(part);
    if (out.empty()) {
      Shape full = y.shape();
      full[0] = x.dim(0);
      out = Tensor<float>(full);
    }
    std::copy(y.storage().begin(), y.storage().end(), out.data() + start * y.row_size());
  }
  return out;
}

}  // namespace

void BackboneSpec::validate() const {
  if (arch != "resnet32" && arch != "resnet18" && arch != "desk") {
    throw ValidationError("unknown backbone arch '" + arch + "' (expected resnet32, resnet18 or desk)");
  }
  const std::size_t blocks = block_plan(*this).size();
  if (split_index > blocks) {
    throw ValidationError("split index " + std::to_string(split_index) + " exceeds the " + std::to_string(blocks) +
                          " building blocks of " + arch);
  }
  if (image_channels == 0 || image_size == 0 || gn_groups == 0) {
    throw ValidationError("backbone needs positive image_channels, image_size and gn_groups");
  }
}

nlohmann::ordered_json BackboneSpec::to_json() const {
  nlohmann::ordered_json j;
  j["arch"] = arch;
  j["split_index"] = split_index;
  j["image_channels"] = image_channels;
  j["image_size"] = image_size;
  j["gn_groups"] = gn_groups;
  return j;
}

BackboneSpec BackboneSpec::from_json(const nlohmann::json& j) {
  BackboneSpec s;
  s.arch = j.at("arch").get<std::string>();
  s.split_index = j.at("split_index").get<std::size_t>();
  s.image_channels = j.at("image_channels").get<std::size_t>();
  s.image_size = j.at("image_size").get<std::size_t>();
  s.gn_groups = j.value("gn_groups", std::size_t{2});
  s.validate();
  return s;
}

BackboneSpec BackboneSpec::resnet32_cifar(std::size_t split_index) {
  return {"resnet32", split_index, 3, 32, 2};
}

BackboneSpec BackboneSpec::resnet18(std::size_t split_index) { return {"resnet18", split_index, 3, 224, 2}; }

BackboneSpec BackboneSpec::desk(std::size_t split_index) { return {"desk", split_index, 3, 16, 2}; }

std::vector<BlockPlan> block_plan(const BackboneSpec& spec) {
  if (spec.arch == "resnet32") return stages(16, {{16, 5}, {32, 5}, {64, 5}});
  if (spec.arch == "resnet18") return stages(64, {{64, 2}, {128, 2}, {256, 2}, {512, 2}});
  if (spec.arch == "desk") {
    return {{8, 8, 1}, {8, 16, 2}, {16, 16, 2}, {16, 32, 2}, {32, 32, 1}};
  }
  throw ValidationError("unknown backbone arch '" + spec.arch + "'");
}

FeatureShape split_feature_shape(const BackboneSpec& spec) {
  spec.validate();
  const StemPlan stem = stem_plan(spec);
  std::size_t size = kernels::conv_out_extent(spec.image_size, stem.kernel, stem.stride, stem.pad);
  if (stem.max_pool) size = kernels::conv_out_extent(size, 3, 2, 1);
  std::size_t channels = stem.channels;
  const auto plan = block_plan(spec);
  for (std::size_t b = 0; b < spec.split_index; ++b) {
    size = kernels::conv_out_extent(size, 3, plan[b].stride, 1);
    channels = plan[b].out_channels;
  }
  return {channels, size, size};
}

SplitBackbone::SplitBackbone(const BackboneSpec& spec, std::size_t num_classes, std::uint64_t seed)
    : spec_(spec),
      feature_shape_(split_feature_shape(spec)),
      seed_(seed),
      rng_(seed),
      classifier_(block_plan(spec).back().out_channels, num_classes, "f2.classifier", rng_) {
  if (num_classes == 0) throw ValidationError("backbone needs at least one class");
  nn::Rng& rng = rng_;
  const StemPlan stem = stem_plan(spec);
  const std::size_t g = spec.gn_groups;
  f1_.add(nn::make_conv_module<float>(spec.image_channels, stem.channels, stem.kernel, stem.stride, stem.pad, g, 0.0,
                                      "f1.stem", rng));
  if (stem.max_pool) f1_.emplace<nn::MaxPool2d<float>>(3, 2, 1);
  f1_layers_ = 1;
  const auto plan = block_plan(spec);
  for (std::size_t b = 0; b < plan.size(); ++b) {
    const bool in_f1 = b < spec.split_index;
    auto& target = in_f1 ? f1_ : f2_features_;
    target.emplace<nn::ResidualBlock<float>>(plan[b].in_channels, plan[b].out_channels, plan[b].stride, 0.0, g,
                                             (in_f1 ? "f1.block" : "f2.block") + std::to_string(b), rng);
    (in_f1 ? f1_layers_ : f2_layers_) += 2;
  }
  f2_features_.emplace<nn::GlobalAvgPool<float>>();
  f2_layers_ += 1;
}

Tensor<float> SplitBackbone::extract(const Tensor<float>& images) const {
  const Shape expected{images.rank() == 4 ? images.dim(0) : 0, spec_.image_channels, spec_.image_size,
                       spec_.image_size};
  if (images.shape() != expected) {
    throw ValidationError("backbone expects images " + shape_to_string(expected) + ", got " +
                          shape_to_string(images.shape()));
  }
  if (images.dim(0) == 0) return Tensor<float>(feature_shape_.batch_shape(0));
  return chunked(f1_, images);
}

Tensor<float> SplitBackbone::logits(const Tensor<float>& features) const {
  if (features.rank() != 4 || features.dim(0) == 0) {
    if (features.rank() == 4) return Tensor<float>({0, num_classes()});
    throw ValidationError("logits expect [B, c, h, w] features");
  }
  return chunked(classifier_, chunked(f2_features_, features));
}

namespace {

std::vector<nn::Parameter<float>*> all_parameters(SplitBackbone& model) {
  std::vector<nn::Parameter<float>*> out;
  for (auto* p : model.f1().parameters()) out.push_back(p);
  for (auto* p : model.f2_features().parameters()) out.push_back(p);
  for (auto* p : model.classifier().parameters()) out.push_back(p);
  return out;
}

}  // namespace

void save_backbone(const SplitBackbone& model, const std::filesystem::path& path) {
  Archive archive;
  nlohmann::ordered_json meta;
  meta["spec"] = model.spec().to_json();
  meta["num_classes"] = model.num_classes();
  meta["seed"] = model.seed();
  archive.add_json("backbone.json", meta);
  auto params = all_parameters(const_cast<SplitBackbone&>(model));
  std::vector<const nn::Parameter<float>*> view(params.begin(), params.end());
  store_weights<float>(archive, view);
  archive.write(path);
}

SplitBackbone load_backbone(const std::filesystem::path& path) {
  const Archive archive = Archive::read(path);
  const auto meta = archive.json("backbone.json");
  SplitBackbone model(BackboneSpec::from_json(meta.at("spec")), meta.at("num_classes").get<std::size_t>(),
                      meta.at("seed").get<std::uint64_t>());
  const auto params = all_parameters(model);
  load_weights<float>(archive, params);
  return model;
}

}  // namespace krnet::kril
