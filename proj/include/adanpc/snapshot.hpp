// Copyright 2026 The adanpc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Feature-pack / snapshot persistence for MemoryBank.
//
// Layout (little-endian):
//   "ANPC" | version u32 | dim u32 | num_classes u32 | count u64 |
//   capacity u64 (0 = unbounded) |
//   count x { id u64 | label u32 | provenance u8 | domain_id u32 |
//             confidence f32 | dim x f32 } |
//   crc32 u32 over every preceding byte
//
// A companion manifest "<basename>.json" carries free-form metadata. The
// IVF index is never serialized; callers rebuild it after loading.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adanpc/memory_bank.hpp"

namespace adanpc {

inline constexpr std::uint32_t kSnapshotVersion = 1;

/// Serializes a bank to bytes (no manifest).
std::vector<std::uint8_t> encode_snapshot(const MemoryBank& bank);

/// Parses bytes produced by encode_snapshot. Throws FormatVersionMismatch
/// for a bad magic or version, ChecksumMismatch for a bad CRC or a
/// truncated/over-long body. Never returns a partial bank.
MemoryBank decode_snapshot(const std::vector<std::uint8_t>& bytes);

/// Writes "<path>" atomically (temp file + rename) and "<path stem>.json".
/// Throws Io.
void snapshot_save(const MemoryBank& bank, const std::filesystem::path& path,
                   const nlohmann::json& metadata = nlohmann::json::object());

/// Throws Io if the file cannot be read, plus the decode errors.
MemoryBank snapshot_load(const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& path);

}  // namespace adanpc
