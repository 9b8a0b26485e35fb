// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/experiment/feature_cache.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace krnet::experiment {

FeatureCache::FeatureCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (dir_.empty()) return;
  std::filesystem::create_directories(dir_);
  std::ifstream in(dir_ / "manifest.json");
  if (!in) return;
  const auto j = nlohmann::json::parse(in);
  for (const auto& [name, entry] : j.at("entries").items()) manifest_[name] = entry;
}

std::string FeatureCache::entry_name(const std::string& key, std::uint64_t f1_hash) const {
  std::ostringstream s;
  s << key << '_' << std::hex << std::setw(16) << std::setfill('0') << f1_hash;
  return s.str();
}

void FeatureCache::write_manifest() const {
  nlohmann::ordered_json j;
  j["format"] = "float32 row-major [N, c, h, w], little-endian";
  j["entries"] = nlohmann::ordered_json::object();
  for (const auto& [name, entry] : manifest_) j["entries"][name] = entry;
  std::ofstream out(dir_ / "manifest.json");
  if (!out) throw RuntimeFailure("cannot write feature cache manifest in " + dir_.string());
  out << j.dump(2) << "\n";
}

FeatureCorpus FeatureCache::get_or_compute(const std::string& key, const kril::SplitBackbone& backbone,
                                           const ImageSet& images) {
  const std::string name = entry_name(key, nn::weight_hash(backbone.f1()));
  if (const auto it = memory_.find(name); it != memory_.end() && it->second.ids == images.ids) {
    ++hits_;
    return it->second;
  }
  const FeatureShape shape = backbone.feature_shape();
  if (!dir_.empty()) {
    const auto it = manifest_.find(name);
    if (it != manifest_.end() && it->second.at("sample_ids").get<std::vector<SampleId>>() == images.ids) {
      FeatureCorpus corpus;
      corpus.ids = images.ids;
      corpus.labels = it->second.at("labels").get<std::vector<ClassLabel>>();
      corpus.features = Tensor<float>(shape.batch_shape(images.size()));
      std::ifstream in(dir_ / it->second.at("file").get<std::string>(), std::ios::binary);
      in.read(reinterpret_cast<char*>(corpus.features.data()),
              static_cast<std::streamsize>(corpus.features.size() * sizeof(float)));
      if (in.gcount() == static_cast<std::streamsize>(corpus.features.size() * sizeof(float))) {
        ++hits_;
        memory_[name] = corpus;
        return corpus;
      }
    }
  }
  ++misses_;
  FeatureCorpus corpus;
  corpus.ids = images.ids;
  corpus.labels = images.labels;
  corpus.features = backbone.extract(images.images);
  if (corpus.feature_shape() != shape && images.size() > 0) {
    throw ValidationError("F1 produced " + corpus.feature_shape().to_string() + " but the backbone declares " +
                          shape.to_string());
  }
  memory_[name] = corpus;
  if (!dir_.empty()) {
    const std::string file = name + ".f32";
    std::ofstream out(dir_ / file, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write feature cache entry " + (dir_ / file).string());
    out.write(reinterpret_cast<const char*>(corpus.features.data()),
              static_cast<std::streamsize>(corpus.features.size() * sizeof(float)));
    nlohmann::ordered_json entry;
    entry["file"] = file;
    entry["N"] = corpus.size();
    entry["shape"] = {shape.channels, shape.height, shape.width};
    entry["zero_fraction"] = zero_fraction(corpus.features);
    entry["sample_ids"] = corpus.ids;
    entry["labels"] = corpus.labels;
    manifest_[name] = entry;
    write_manifest();
  }
  return corpus;
}

double zero_fraction(const Tensor<float>& features) {
  if (features.size() == 0) return 0.0;
  std::size_t zeros = 0;
  for (float v : features.storage()) zeros += v == 0.0f;
  return static_cast<double>(zeros) / static_cast<double>(features.size());
}

}  // namespace krnet::experiment
