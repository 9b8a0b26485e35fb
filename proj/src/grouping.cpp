// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/grouping.hpp"

#include <algorithm>
#include <set>

namespace krnet {

namespace {

void check_group_size(std::size_t group_size) {
  if (group_size == 0) throw ValidationError("group size H must be at least 1");
}

}  // namespace

void GroupIndex::add_group(ClassLabel label, std::span<const SampleId> members) {
  const std::size_t m = groups_.size();
  groups_.push_back({m, label, members.size()});
  group_offset_.push_back(order_.size());
  for (std::size_t n = 0; n < members.size(); ++n) {
    if (!slots_.emplace(members[n], SampleSlot{m, n}).second) {
      throw ValidationError("duplicate sample ID " + std::to_string(members[n]) + " in group index");
    }
    order_.push_back(members[n]);
  }
}

GroupIndex GroupIndex::build(std::span<const LabeledSample> samples, std::size_t group_size) {
  check_group_size(group_size);
  if (samples.empty()) throw ValidationError("cannot group an empty sample set");
  std::vector<LabeledSample> sorted(samples.begin(), samples.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const LabeledSample& a, const LabeledSample& b) {
    return a.label != b.label ? a.label < b.label : a.id < b.id;
  });
  GroupIndex index;
  index.group_size_ = group_size;
  std::vector<SampleId> members;
  for (std::size_t i = 0; i < sorted.size();) {
    const ClassLabel label = sorted[i].label;
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].label == label) ++j;
    for (std::size_t start = i; start < j; start += group_size) {
      members.clear();
      for (std::size_t k = start; k < std::min(j, start + group_size); ++k) members.push_back(sorted[k].id);
      index.add_group(label, members);
    }
    i = j;
  }
  return index;
}

GroupIndex GroupIndex::build_unlabeled(std::span<const SampleId> ids, std::size_t group_size) {
  check_group_size(group_size);
  if (ids.empty()) throw ValidationError("cannot group an empty sample set");
  GroupIndex index;
  index.group_size_ = group_size;
  for (std::size_t start = 0; start < ids.size(); start += group_size) {
    index.add_group(kUnlabeled, ids.subspan(start, std::min(group_size, ids.size() - start)));
  }
  return index;
}

SampleSlot GroupIndex::slot(SampleId id) const {
  const auto it = slots_.find(id);
  if (it == slots_.end()) throw ValidationError("unknown sample ID " + std::to_string(id));
  return it->second;
}

SampleId GroupIndex::sample_at(std::size_t group, std::size_t local) const {
  if (group >= groups_.size() || local >= groups_[group].count) {
    throw ValidationError("(m=" + std::to_string(group) + ", n=" + std::to_string(local) +
                          ") does not address a stored sample");
  }
  return order_[group_offset_[group] + local];
}

std::vector<ClassLabel> GroupIndex::classes() const {
  std::set<ClassLabel> labels;
  for (const auto& g : groups_) labels.insert(g.class_label);
  return {labels.begin(), labels.end()};
}

nlohmann::ordered_json GroupIndex::to_json() const {
  nlohmann::ordered_json j;
  j["H"] = group_size_;
  auto groups = nlohmann::ordered_json::array();
  for (const auto& g : groups_) {
    nlohmann::ordered_json entry;
    entry["m"] = g.id;
    entry["class"] = g.class_label;
    entry["count"] = g.count;
    groups.push_back(std::move(entry));
  }
  j["groups"] = std::move(groups);
  auto samples = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < groups_.size(); ++m) {
    for (std::size_t n = 0; n < groups_[m].count; ++n) {
      samples.push_back({order_[group_offset_[m] + n], m, n});
    }
  }
  j["samples"] = std::move(samples);
  return j;
}

GroupIndex GroupIndex::from_json(const nlohmann::json& j) {
  GroupIndex index;
  index.group_size_ = j.at("H").get<std::size_t>();
  check_group_size(index.group_size_);
  const auto& groups = j.at("groups");
  std::vector<std::vector<SampleId>> members(groups.size());
  std::vector<ClassLabel> labels;
  for (std::size_t m = 0; m < groups.size(); ++m) {
    if (groups[m].at("m").get<std::size_t>() != m) throw ValidationError("group IDs must be 0..M-1 in order");
    labels.push_back(groups[m].at("class").get<ClassLabel>());
    const auto count = groups[m].at("count").get<std::size_t>();
    if (count == 0 || count > index.group_size_) throw ValidationError("group count outside [1, H]");
    members[m].resize(count);
  }
  std::vector<std::vector<bool>> seen(groups.size());
  for (std::size_t m = 0; m < groups.size(); ++m) seen[m].assign(members[m].size(), false);
  for (const auto& s : j.at("samples")) {
    const auto id = s.at(0).get<SampleId>();
    const auto m = s.at(1).get<std::size_t>();
    const auto n = s.at(2).get<std::size_t>();
    if (m >= members.size() || n >= members[m].size() || seen[m][n]) {
      throw ValidationError("sample entry (" + std::to_string(id) + ", " + std::to_string(m) + ", " +
                            std::to_string(n) + ") is out of range or duplicated");
    }
    members[m][n] = id;
    seen[m][n] = true;
  }
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (std::find(seen[m].begin(), seen[m].end(), false) != seen[m].end()) {
      throw ValidationError("group " + std::to_string(m) + " has unassigned local IDs");
    }
    index.add_group(labels[m], members[m]);
  }
  return index;
}

GroupIndex build_group_index(const std::map<ClassLabel, std::size_t>& class_counts, std::size_t group_size) {
  check_group_size(group_size);
  if (class_counts.empty()) throw ValidationError("class_counts must not be empty");
  std::vector<LabeledSample> samples;
  SampleId next = 0;
  for (const auto& [label, count] : class_counts) {
    if (count == 0) throw ValidationError("class " + std::to_string(label) + " has no samples");
    for (std::size_t i = 0; i < count; ++i) samples.push_back({next++, label});
  }
  return GroupIndex::build(samples, group_size);
}

std::size_t count_groups(const std::map<ClassLabel, std::size_t>& class_counts, std::size_t group_size) {
  check_group_size(group_size);
  std::size_t total = 0;
  for (const auto& [label, count] : class_counts) total += (count + group_size - 1) / group_size;
  return total;
}

PermutationMatrix::PermutationMatrix(std::size_t local_id, std::size_t size)
    : size_(size), local_id_(local_id), entries_(size * size, 0) {
  check_local_id(local_id, size);
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      const bool forward = j >= i && j - i == local_id;
      const bool wrapped = i >= j && i - j == size - local_id;
      entries_[i * size + j] = (forward || wrapped) ? 1 : 0;
    }
  }
}

std::vector<double> PermutationMatrix::apply(std::span<const double> v) const {
  if (v.size() != size_) throw ValidationError("vector dimension does not match permutation size");
  std::vector<double> out(size_, 0.0);
  for (std::size_t i = 0; i < size_; ++i) {
    for (std::size_t j = 0; j < size_; ++j) out[i] += at(i, j) * v[j];
  }
  return out;
}

PermutationMatrix PermutationMatrix::compose(const PermutationMatrix& rhs) const {
  if (rhs.size_ != size_) throw ValidationError("cannot compose permutations of different sizes");
  std::vector<std::uint8_t> out(size_ * size_, 0);
  for (std::size_t i = 0; i < size_; ++i) {
    for (std::size_t k = 0; k < size_; ++k) {
      if (!at(i, k)) continue;
      for (std::size_t j = 0; j < size_; ++j) out[i * size_ + j] |= rhs.at(k, j);
    }
  }
  return PermutationMatrix(size_, std::move(out), (local_id_ + rhs.local_id_) % size_);
}

bool PermutationMatrix::is_identity() const {
  for (std::size_t i = 0; i < size_; ++i) {
    for (std::size_t j = 0; j < size_; ++j) {
      if (at(i, j) != (i == j ? 1 : 0)) return false;
    }
  }
  return true;
}

}  // namespace krnet
