// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/corpus.hpp"

#include <algorithm>
#include <unordered_set>

namespace krnet {

std::string FeatureShape::to_string() const {
  return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

FeatureShape FeatureCorpus::feature_shape() const {
  if (features.rank() != 4) return {};
  return {features.dim(1), features.dim(2), features.dim(3)};
}

void FeatureCorpus::validate() const {
  if (features.rank() != 4) throw ValidationError("feature corpus must be [N, c, h, w]");
  if (features.dim(0) != ids.size() || ids.size() != labels.size()) {
    throw ValidationError("feature corpus rows, IDs and labels are misaligned");
  }
  std::unordered_set<SampleId> seen;
  for (SampleId id : ids) {
    if (!seen.insert(id).second) throw ValidationError("duplicate sample ID " + std::to_string(id) + " in corpus");
  }
}

FeatureCorpus FeatureCorpus::subset(std::span<const std::size_t> rows) const {
  FeatureCorpus out;
  out.features = gather_rows(features, rows);
  for (std::size_t r : rows) {
    out.ids.push_back(ids.at(r));
    out.labels.push_back(labels.at(r));
  }
  return out;
}

FeatureCorpus FeatureCorpus::filter_classes(std::span<const ClassLabel> classes) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < size(); ++i) {
    if (std::find(classes.begin(), classes.end(), labels[i]) != classes.end()) rows.push_back(i);
  }
  return subset(rows);
}

std::vector<LabeledSample> FeatureCorpus::labeled_samples() const {
  std::vector<LabeledSample> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = {ids[i], labels[i]};
  return out;
}

FeatureCorpus merge_corpora(const FeatureCorpus& a, const FeatureCorpus& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  std::unordered_set<SampleId> ids(a.ids.begin(), a.ids.end());
  for (SampleId id : b.ids) {
    if (ids.count(id)) throw ValidationError("sample ID collision while merging corpora: " + std::to_string(id));
  }
  FeatureCorpus out;
  out.features = concat_rows(a.features, b.features);
  out.ids = a.ids;
  out.ids.insert(out.ids.end(), b.ids.begin(), b.ids.end());
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

}  // namespace krnet
