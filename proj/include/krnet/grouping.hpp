// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Partition of a sample population into groups of at most H samples, and
// the cyclic permutation that turns one shared dynamic vector into a
// distinct embedding per local ID.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "krnet/error.hpp"

namespace krnet {

using SampleId = std::uint64_t;
using ClassLabel = std::int64_t;

/// Class label recorded for groups built without labels.
inline constexpr ClassLabel kUnlabeled = -1;

struct GroupInfo {
  std::size_t id = 0;
  ClassLabel class_label = kUnlabeled;
  std::size_t count = 0;
};

/// Position of a sample inside the index: group ID m and local ID n.
struct SampleSlot {
  std::size_t group = 0;
  std::size_t local = 0;
  bool operator==(const SampleSlot&) const = default;
};

struct LabeledSample {
  SampleId id = 0;
  ClassLabel label = kUnlabeled;
};

/// Immutable after construction.
class GroupIndex {
 public:
  GroupIndex() = default;

  /// Per-class grouping. Samples are ordered by (label, id) and filled into
  /// groups sequentially; a class never shares a group with another class.
  static GroupIndex build(std::span<const LabeledSample> samples, std::size_t group_size);
  /// Sequential fill in the given order, ignoring class.
  static GroupIndex build_unlabeled(std::span<const SampleId> ids, std::size_t group_size);

  std::size_t group_size() const { return group_size_; }
  std::size_t num_groups() const { return groups_.size(); }
  std::size_t num_samples() const { return order_.size(); }
  const std::vector<GroupInfo>& groups() const { return groups_; }

  bool contains(SampleId id) const { return slots_.count(id) != 0; }
  /// Throws ValidationError for unknown IDs.
  SampleSlot slot(SampleId id) const;
  /// Throws ValidationError when (m, n) does not address a stored sample.
  SampleId sample_at(std::size_t group, std::size_t local) const;
  ClassLabel label_of(SampleId id) const { return groups_[slot(id).group].class_label; }
  /// Sample IDs in (group, local) order.
  const std::vector<SampleId>& sample_ids() const { return order_; }
  /// Sorted distinct labels of the groups.
  std::vector<ClassLabel> classes() const;

  nlohmann::ordered_json to_json() const;
  static GroupIndex from_json(const nlohmann::json& j);

 private:
  void add_group(ClassLabel label, std::span<const SampleId> members);

  std::size_t group_size_ = 0;
  std::vector<GroupInfo> groups_;
  std::vector<std::size_t> group_offset_;  // into order_
  std::vector<SampleId> order_;
  std::unordered_map<SampleId, SampleSlot> slots_;
};

/// Groups for a population described only by per-class counts. Global IDs are
/// assigned 0..N-1 in (class, position) order.
GroupIndex build_group_index(const std::map<ClassLabel, std::size_t>& class_counts, std::size_t group_size);

/// M = sum over classes of ceil(N_c / H), without materialising the index.
std::size_t count_groups(const std::map<ClassLabel, std::size_t>& class_counts, std::size_t group_size);

/// Binary H x H matrix A_n with a_ij = 1 iff j - i = n or i - j = H - n.
class PermutationMatrix {
 public:
  PermutationMatrix(std::size_t local_id, std::size_t size);

  std::size_t size() const { return size_; }
  std::size_t local_id() const { return local_id_; }
  std::uint8_t at(std::size_t i, std::size_t j) const { return entries_[i * size_ + j]; }
  /// Explicit matrix-vector product A_n v.
  std::vector<double> apply(std::span<const double> v) const;
  PermutationMatrix compose(const PermutationMatrix& rhs) const;  // this * rhs
  bool is_identity() const;

 private:
  PermutationMatrix(std::size_t size, std::vector<std::uint8_t> entries, std::size_t local_id)
      : size_(size), local_id_(local_id), entries_(std::move(entries)) {}

  std::size_t size_;
  std::size_t local_id_;
  std::vector<std::uint8_t> entries_;
};

inline void check_local_id(std::size_t local_id, std::size_t size) {
  if (size == 0) throw ValidationError("permutation size must be positive");
  if (local_id >= size) {
    throw ValidationError("local ID " + std::to_string(local_id) + " out of range for group size " +
                          std::to_string(size));
  }
}

/// out = A_n v as an index roll: out[j] = v[(j + n) mod H].
template <typename T>
void apply_local_permutation(std::span<const T> v, std::size_t local_id, std::span<T> out) {
  const std::size_t size = v.size();
  check_local_id(local_id, size);
  if (out.size() != size) throw ValidationError("permutation output has the wrong dimension");
  for (std::size_t j = 0; j < size; ++j) out[j] = v[(j + local_id) % size];
}

template <typename T>
std::vector<T> apply_local_permutation(std::span<const T> v, std::size_t local_id) {
  std::vector<T> out(v.size());
  apply_local_permutation<T>(v, local_id, std::span<T>(out));
  return out;
}

/// grad_v += A_n^T grad_out, the adjoint of apply_local_permutation.
template <typename T>
void accumulate_permutation_adjoint(std::span<const T> grad_out, std::size_t local_id, std::span<T> grad_v) {
  const std::size_t size = grad_out.size();
  for (std::size_t j = 0; j < size; ++j) grad_v[(j + local_id) % size] += grad_out[j];
}

}  // namespace krnet
