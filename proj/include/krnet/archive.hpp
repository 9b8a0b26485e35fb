// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Framework-neutral single-file container used for checkpoints. Layout is
// documented in docs/FORMATS.md; all integers are little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "krnet/tensor.hpp"

namespace krnet {

enum class EntryKind : std::uint8_t { kJson = 0, kFloat32 = 1, kBytes = 2 };

struct ArchiveEntry {
  std::string name;
  EntryKind kind = EntryKind::kBytes;
  Shape shape;
  std::vector<std::uint8_t> payload;
};

class Archive {
 public:
  void add_json(const std::string& name, const nlohmann::ordered_json& value);
  void add_floats(const std::string& name, const Shape& shape, std::span<const float> values);
  void add_bytes(const std::string& name, std::span<const std::uint8_t> bytes);

  bool contains(const std::string& name) const { return find(name) != nullptr; }
  const ArchiveEntry* find(const std::string& name) const;
  /// Throws ValidationError when the entry is missing or has another kind.
  nlohmann::json json(const std::string& name) const;
  Tensor<float> floats(const std::string& name) const;
  const std::vector<ArchiveEntry>& entries() const { return entries_; }

  void write(const std::filesystem::path& path) const;
  static Archive read(const std::filesystem::path& path);

 private:
  const ArchiveEntry& require(const std::string& name, EntryKind kind) const;
  std::vector<ArchiveEntry> entries_;
};

}  // namespace krnet
