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

#include "adanpc/snapshot.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "adanpc/error.hpp"

namespace adanpc {
namespace {

constexpr char kMagic[4] = {'A', 'N', 'P', 'C'};
constexpr std::size_t kHeaderSize = 4 + 4 + 4 + 4 + 8 + 8;
constexpr std::size_t kEntryFixedSize = 8 + 4 + 1 + 4 + 4;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void le(T v) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  template <typename T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(data_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  void need(std::size_t n) const {
    if (size_ - pos_ < n) throw Error(ErrorCode::kChecksumMismatch, "snapshot body truncated");
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(crc, data, static_cast<uInt>(n)));
}

}  // namespace

std::vector<std::uint8_t> encode_snapshot(const MemoryBank& bank) {
  Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint32_t>(kSnapshotVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(bank.dim()));
  w.le<std::uint32_t>(bank.num_classes());
  w.le<std::uint64_t>(bank.size());
  w.le<std::uint64_t>(bank.capacity().value_or(0));
  for (std::size_t pos = 0; pos < bank.size(); ++pos) {
    const Provenance& p = bank.provenance_at(pos);
    w.le<std::uint64_t>(bank.id_at(pos));
    w.le<std::uint32_t>(bank.label_at(pos));
    w.le<std::uint8_t>(static_cast<std::uint8_t>(p.kind));
    w.le<std::uint32_t>(p.domain_id);
    w.f32(p.confidence);
    for (float v : bank.feature_at(pos)) w.f32(v);
  }
  std::uint32_t crc = crc_of(w.buffer().data(), w.buffer().size());
  w.le<std::uint32_t>(crc);
  return std::move(w.buffer());
}

MemoryBank decode_snapshot(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kFormatVersionMismatch, "not a feature pack (bad magic)");
  }
  if (bytes.size() < kHeaderSize + 4) {
    throw Error(ErrorCode::kChecksumMismatch, "snapshot shorter than its header");
  }
  Reader r(bytes.data() + 4, bytes.size() - 4);
  std::uint32_t version = r.le<std::uint32_t>();
  if (version != kSnapshotVersion) {
    throw Error(ErrorCode::kFormatVersionMismatch,
                "snapshot version " + std::to_string(version) + " is not supported");
  }
  std::size_t body = bytes.size() - 4;
  std::uint32_t stored_crc = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    stored_crc |= static_cast<std::uint32_t>(bytes[body + i]) << (8 * i);
  }
  if (crc_of(bytes.data(), body) != stored_crc) {
    throw Error(ErrorCode::kChecksumMismatch, "snapshot CRC32 does not match");
  }

  std::uint32_t dim = r.le<std::uint32_t>();
  std::uint32_t num_classes = r.le<std::uint32_t>();
  std::uint64_t count = r.le<std::uint64_t>();
  std::uint64_t capacity = r.le<std::uint64_t>();
  if (dim == 0 || num_classes == 0) {
    throw Error(ErrorCode::kFormatVersionMismatch, "snapshot header has zero dim or classes");
  }
  std::size_t per_entry = kEntryFixedSize + 4 * static_cast<std::size_t>(dim);
  if ((bytes.size() - kHeaderSize - 4) != count * per_entry) {
    throw Error(ErrorCode::kChecksumMismatch, "snapshot length does not match entry count");
  }
  std::vector<MemoryEntry> entries(count);
  for (auto& e : entries) {
    e.id = r.le<std::uint64_t>();
    e.label = r.le<std::uint32_t>();
    std::uint8_t tag = r.le<std::uint8_t>();
    if (tag > 1) throw Error(ErrorCode::kFormatVersionMismatch, "unknown provenance tag");
    e.provenance.kind = static_cast<ProvenanceKind>(tag);
    e.provenance.domain_id = r.le<std::uint32_t>();
    e.provenance.confidence = r.f32();
    e.feature.resize(dim);
    for (float& v : e.feature) v = r.f32();
  }
  std::optional<std::size_t> cap;
  if (capacity != 0) cap = static_cast<std::size_t>(capacity);
  return MemoryBank::from_entries(dim, num_classes, cap, std::move(entries), 0);
}

std::filesystem::path manifest_path(const std::filesystem::path& path) {
  auto out = path;
  out.replace_extension(".json");
  return out;
}

void snapshot_save(const MemoryBank& bank, const std::filesystem::path& path,
                   const nlohmann::json& metadata) {
  std::vector<std::uint8_t> bytes = encode_snapshot(bank);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "rename to " + path.string() + ": " + ec.message());

  nlohmann::json manifest = {
      {"format", "ANPC"},
      {"version", kSnapshotVersion},
      {"dim", bank.dim()},
      {"num_classes", bank.num_classes()},
      {"entries", bank.size()},
      {"capacity", bank.capacity().value_or(0)},
      {"source_count", bank.source_count()},
      {"target_count", bank.target_count()},
      {"metadata", metadata},
  };
  std::ofstream m(manifest_path(path), std::ios::trunc);
  if (!m) throw Error(ErrorCode::kIo, "cannot write manifest for " + path.string());
  m << manifest.dump(2) << "\n";
}

MemoryBank snapshot_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIo, "read failed for " + path.string());
  return decode_snapshot(bytes);
}

}  // namespace adanpc
