// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "krnet/grouping.hpp"

namespace krnet::kril {

/// Ordered class sets of tasks 0..T. Task 0 (the base task) holds half of the
/// classes; the rest are split evenly into T increments, with any remainder
/// handed out one class at a time to the earliest increments.
struct TaskSequence {
  std::vector<std::vector<ClassLabel>> tasks;

  std::size_t num_increments() const { return tasks.empty() ? 0 : tasks.size() - 1; }
  /// Classes of tasks 0..t in task order; classifier output k is seen_classes(t)[k].
  std::vector<ClassLabel> seen_classes(std::size_t t) const;
  /// Throws ValidationError when two tasks share a label or a task is empty.
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

/// Shuffles `classes` with `seed` before splitting.
TaskSequence make_task_sequence(std::span<const ClassLabel> classes, std::size_t increments, std::uint64_t seed);

}  // namespace krnet::kril
