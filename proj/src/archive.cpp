// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace krnet {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'K', 'R', 'N', 'A'};
constexpr std::uint32_t kVersion = 1;

template <typename U>
void put(std::ostream& os, U value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(U));
}

template <typename U>
U get(std::istream& is) {
  U value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(U));
  if (!is) throw ValidationError("archive truncated");
  return value;
}

}  // namespace

void Archive::add_json(const std::string& name, const nlohmann::ordered_json& value) {
  const std::string text = value.dump();
  entries_.push_back({name, EntryKind::kJson, {text.size()}, {text.begin(), text.end()}});
}

void Archive::add_floats(const std::string& name, const Shape& shape, std::span<const float> values) {
  if (shape_numel(shape) != values.size()) throw ValidationError("archive entry " + name + ": shape/size mismatch");
  ArchiveEntry e{name, EntryKind::kFloat32, shape, std::vector<std::uint8_t>(values.size() * sizeof(float))};
  std::memcpy(e.payload.data(), values.data(), e.payload.size());
  entries_.push_back(std::move(e));
}

void Archive::add_bytes(const std::string& name, std::span<const std::uint8_t> bytes) {
  entries_.push_back({name, EntryKind::kBytes, {bytes.size()}, {bytes.begin(), bytes.end()}});
}

const ArchiveEntry* Archive::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

const ArchiveEntry& Archive::require(const std::string& name, EntryKind kind) const {
  const ArchiveEntry* e = find(name);
  if (!e) throw ValidationError("archive has no entry named " + name);
  if (e->kind != kind) throw ValidationError("archive entry " + name + " has an unexpected kind");
  return *e;
}

nlohmann::json Archive::json(const std::string& name) const {
  const auto& e = require(name, EntryKind::kJson);
  return nlohmann::json::parse(e.payload.begin(), e.payload.end());
}

Tensor<float> Archive::floats(const std::string& name) const {
  const auto& e = require(name, EntryKind::kFloat32);
  std::vector<float> data(e.payload.size() / sizeof(float));
  std::memcpy(data.data(), e.payload.data(), e.payload.size());
  return Tensor<float>(e.shape, std::move(data));
}

void Archive::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw RuntimeFailure("cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(e.kind));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t d : e.shape) put<std::uint64_t>(os, d);
    put<std::uint64_t>(os, e.payload.size());
    os.write(reinterpret_cast<const char*>(e.payload.data()), static_cast<std::streamsize>(e.payload.size()));
  }
  if (!os) throw RuntimeFailure("failed writing " + path.string());
}

Archive Archive::read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open archive " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw ValidationError(path.string() + " is not a KRNA archive");
  if (get<std::uint32_t>(is) != kVersion) throw ValidationError("unsupported archive version in " + path.string());
  const auto count = get<std::uint32_t>(is);
  Archive archive;
  for (std::uint32_t i = 0; i < count; ++i) {
    ArchiveEntry e;
    e.name.resize(get<std::uint32_t>(is));
    is.read(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    const auto kind = get<std::uint8_t>(is);
    if (kind > 2) throw ValidationError("archive entry " + e.name + " has unknown kind");
    e.kind = static_cast<EntryKind>(kind);
    e.shape.resize(get<std::uint32_t>(is));
    for (auto& d : e.shape) d = get<std::uint64_t>(is);
    e.payload.resize(get<std::uint64_t>(is));
    is.read(reinterpret_cast<char*>(e.payload.data()), static_cast<std::streamsize>(e.payload.size()));
    if (!is) throw ValidationError("archive entry " + e.name + " truncated");
    if (e.kind == EntryKind::kFloat32 && shape_numel(e.shape) * sizeof(float) != e.payload.size()) {
      throw ValidationError("archive entry " + e.name + " size does not match its shape");
    }
    archive.entries_.push_back(std::move(e));
  }
  return archive;
}

}  // namespace krnet
