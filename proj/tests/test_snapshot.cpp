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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "adanpc/error.hpp"
#include "adanpc/snapshot.hpp"
#include "test_util.hpp"

namespace adanpc {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("adanpc_snapshot_" + name);
}

std::vector<std::uint8_t> read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ErrorCode load_error(const fs::path& p) {
  try {
    snapshot_load(p);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "load succeeded";
  return ErrorCode::kBadParams;
}

MemoryBank mixed_bank(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MemoryBank bank(7, 3, 40);
  for (int i = 0; i < 55; ++i) {
    auto f = testing::random_feature(rng, 7);
    Provenance p = i % 3 ? Provenance::source(i % 4) : Provenance::target(0.5f + i * 0.001f, 2);
    bank.insert(f, static_cast<ClassLabel>(i % 3), p);
  }
  return bank;
}

TEST(Snapshot, RoundTripIsBitExact) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    MemoryBank bank = mixed_bank(seed);
    auto path = temp_file("rt.pack");
    snapshot_save(bank, path, {{"seed", seed}});
    MemoryBank back = snapshot_load(path);
    EXPECT_EQ(back.dim(), bank.dim());
    EXPECT_EQ(back.num_classes(), bank.num_classes());
    EXPECT_EQ(back.capacity(), bank.capacity());
    EXPECT_EQ(back.entries(), bank.entries());
    EXPECT_EQ(encode_snapshot(back), encode_snapshot(bank));
    EXPECT_TRUE(fs::exists(manifest_path(path)));
  }
}

TEST(Snapshot, EmptyBankRoundTrips) {
  MemoryBank bank(4, 2);
  auto back = decode_snapshot(encode_snapshot(bank));
  EXPECT_EQ(back.size(), 0u);
  EXPECT_EQ(back.dim(), 4u);
}

TEST(Snapshot, CorruptedMagic) {
  auto path = temp_file("magic.pack");
  snapshot_save(mixed_bank(4), path);
  auto bytes = read_all(path);
  bytes[0] ^= 0xFF;
  write_all(path, bytes);
  EXPECT_EQ(load_error(path), ErrorCode::kFormatVersionMismatch);
}

TEST(Snapshot, TruncatedFileNeverLoads) {
  auto path = temp_file("trunc.pack");
  snapshot_save(mixed_bank(5), path);
  auto bytes = read_all(path);
  for (std::size_t cut : {bytes.size() - 1, bytes.size() / 2, std::size_t{30}, std::size_t{5}}) {
    std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    write_all(path, part);
    ErrorCode c = load_error(path);
    EXPECT_TRUE(c == ErrorCode::kChecksumMismatch || c == ErrorCode::kIo) << cut;
  }
}

TEST(Snapshot, EveryFlippedByteIsRejected) {
  auto bytes = encode_snapshot(mixed_bank(6));
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    auto copy = bytes;
    copy[i] ^= 0x5A;
    EXPECT_THROW(decode_snapshot(copy), Error) << "byte " << i;
  }
}

TEST(Snapshot, MissingFileIsIo) {
  EXPECT_EQ(load_error(temp_file("does_not_exist.pack")), ErrorCode::kIo);
}

TEST(Snapshot, FailedLoadLeavesCallerBankUntouched) {
  auto path = temp_file("atomic.pack");
  MemoryBank good = mixed_bank(7);
  snapshot_save(good, path);
  MemoryBank held = snapshot_load(path);
  auto bytes = read_all(path);
  bytes[bytes.size() / 2] ^= 1;
  write_all(path, bytes);
  try {
    held = snapshot_load(path);
  } catch (const Error&) {
  }
  EXPECT_EQ(held.entries(), good.entries());
}

}  // namespace
}  // namespace adanpc
