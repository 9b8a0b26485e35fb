// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/kril/task_sequence.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "krnet/nn/module.hpp"

namespace krnet::kril {

std::vector<ClassLabel> TaskSequence::seen_classes(std::size_t t) const {
  std::vector<ClassLabel> out;
  for (std::size_t i = 0; i <= t && i < tasks.size(); ++i) out.insert(out.end(), tasks[i].begin(), tasks[i].end());
  return out;
}

void TaskSequence::validate() const {
  if (tasks.size() < 2) throw ValidationError("a task sequence needs a base task and at least one increment");
  std::set<ClassLabel> seen;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (tasks[t].empty()) throw ValidationError("task " + std::to_string(t) + " has no classes");
    for (ClassLabel c : tasks[t]) {
      if (!seen.insert(c).second) {
        throw ValidationError("class " + std::to_string(c) + " appears in more than one task");
      }
    }
  }
}

nlohmann::ordered_json TaskSequence::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& t : tasks) j.push_back(t);
  return j;
}

TaskSequence make_task_sequence(std::span<const ClassLabel> classes, std::size_t increments, std::uint64_t seed) {
  if (increments == 0) throw ValidationError("the number of incremental tasks T must be at least 1");
  std::vector<ClassLabel> order(classes.begin(), classes.end());
  const std::size_t base = order.size() / 2;
  const std::size_t rest = order.size() - base;
  if (base == 0 || rest < increments) {
    throw ValidationError("cannot split " + std::to_string(order.size()) + " classes into a base task and " +
                          std::to_string(increments) + " increments");
  }
  nn::Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  TaskSequence seq;
  seq.tasks.emplace_back(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(base));
  std::size_t cursor = base;
  for (std::size_t t = 0; t < increments; ++t) {
    const std::size_t size = rest / increments + (t < rest % increments ? 1 : 0);
    seq.tasks.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                           order.begin() + static_cast<std::ptrdiff_t>(cursor + size));
    cursor += size;
  }
  seq.validate();
  return seq;
}

}  // namespace krnet::kril
