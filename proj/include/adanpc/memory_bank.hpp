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

// The memory bank: an ordered, searchable collection of labeled features.
//
// Two modes share one type. With a capacity the bank is a FIFO queue that
// evicts its lowest id first (training). Without one it is append-only
// (inference); nothing at test time ever removes an entry.
//
// Features are stored L2-normalized as f32. Similarities are computed in
// f64 as dot(q, e) / (|q| |e|) using cached entry norms, which makes the
// scan agree bit-for-bit with cosine_similarity() on the stored vectors.
//
// Thread safety: const members may run concurrently; mutations need
// external single-writer serialization.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

namespace adanpc {

using EntryId = std::uint64_t;
using ClassLabel = std::uint32_t;

enum class ProvenanceKind : std::uint8_t { kSource = 0, kTarget = 1 };

struct Provenance {
  ProvenanceKind kind = ProvenanceKind::kSource;
  std::uint32_t domain_id = 0;
  // Prediction confidence at insertion for target entries; 1 for source.
  float confidence = 1.0f;

  static Provenance source(std::uint32_t domain_id) {
    return {ProvenanceKind::kSource, domain_id, 1.0f};
  }
  static Provenance target(float confidence, std::uint32_t domain_id = 0) {
    return {ProvenanceKind::kTarget, domain_id, confidence};
  }
  bool is_source() const { return kind == ProvenanceKind::kSource; }
  bool operator==(const Provenance&) const = default;
};

struct MemoryEntry {
  EntryId id = 0;
  std::vector<float> feature;  // unit norm
  ClassLabel label = 0;
  Provenance provenance;
  bool operator==(const MemoryEntry&) const = default;
};

struct Neighbor {
  EntryId id = 0;
  double similarity = 0.0;
  bool operator==(const Neighbor&) const = default;
};

/// Sorted by descending similarity, then ascending id.
using NeighborSet = std::vector<Neighbor>;
using ExclusionSet = std::unordered_set<EntryId>;

struct IvfBuildOptions {
  std::size_t n_clusters = 64;
  std::uint64_t seed = 0;
  int iterations = 25;
  // k-means trains on at most this many sampled entries; 0 means
  // 256 per cluster.
  std::size_t max_train_points = 0;
};

struct IvfIndex {
  std::size_t n_clusters = 0;
  std::vector<float> centroids;                  // n_clusters x dim, row-major
  std::vector<std::vector<EntryId>> posting_lists;
  EntryId indexed_below = 0;   // entries with id >= this form the tail
  std::size_t indexed_count = 0;
};

class MemoryBank {
 public:
  MemoryBank(std::size_t dim, std::uint32_t num_classes,
             std::optional<std::size_t> capacity = std::nullopt);

  /// Rebuilds a bank from stored entries without renormalizing features.
  /// Ids must be strictly increasing. Used by snapshot loading.
  static MemoryBank from_entries(std::size_t dim, std::uint32_t num_classes,
                                 std::optional<std::size_t> capacity,
                                 std::vector<MemoryEntry> entries, EntryId next_id);

  /// Appends an entry and returns its id. In FIFO mode the oldest entry is
  /// evicted when the capacity would be exceeded.
  EntryId insert(std::span<const float> feature, ClassLabel label, Provenance provenance);

  /// Replaces the stored feature of an entry (training-bank EM refresh).
  /// Marks any IVF index stale.
  void update_feature(EntryId id, std::span<const float> feature);

  std::size_t dim() const { return dim_; }
  std::uint32_t num_classes() const { return num_classes_; }
  std::optional<std::size_t> capacity() const { return capacity_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  EntryId next_id() const { return next_id_; }
  /// Bumped by every mutation.
  std::uint64_t version() const { return version_; }

  bool contains(EntryId id) const { return position(id).has_value(); }
  std::optional<std::size_t> position(EntryId id) const;

  EntryId id_at(std::size_t pos) const { return ids_[pos]; }
  std::span<const float> feature_at(std::size_t pos) const {
    return {features_.data() + pos * dim_, dim_};
  }
  ClassLabel label_at(std::size_t pos) const { return labels_[pos]; }
  const Provenance& provenance_at(std::size_t pos) const { return provenance_[pos]; }

  /// Copy of one entry. Throws UnknownEntry.
  MemoryEntry entry(EntryId id) const;
  std::vector<MemoryEntry> entries() const;

  std::size_t source_count() const;
  std::size_t target_count() const { return size() - source_count(); }

  /// Full-scan top-k by cosine similarity. Throws EmptyBank when nothing
  /// is left after exclusions, DimMismatch, ZeroNorm.
  NeighborSet knn_exact(std::span<const float> query, std::size_t k,
                        const ExclusionSet& exclude = {}) const;

  /// Builds the IVF index over the current entries. Throws
  /// NotEnoughEntries when size() < n_clusters.
  void build_ivf(const IvfBuildOptions& options);
  bool has_ivf() const { return ivf_.has_value(); }
  const IvfIndex* ivf() const { return ivf_ ? &*ivf_ : nullptr; }
  /// Rebuild hint: entries were evicted or changed since the build, or the
  /// un-indexed tail outgrew the indexed part.
  bool ivf_stale() const;
  std::size_t ivf_tail_size() const;

  /// Scans the nprobe nearest posting lists plus the un-indexed tail.
  /// Throws IndexMissing, BadParams for nprobe outside [1, n_clusters].
  NeighborSet knn_ivf(std::span<const float> query, std::size_t k, std::size_t nprobe,
                      const ExclusionSet& exclude = {}) const;

 private:
  void check_feature(std::span<const float> feature) const;
  void evict_front();

  std::size_t dim_;
  std::uint32_t num_classes_;
  std::optional<std::size_t> capacity_;
  EntryId next_id_ = 0;
  std::uint64_t version_ = 0;

  std::vector<float> features_;  // size() x dim, row-major
  std::vector<double> norms_;
  std::vector<EntryId> ids_;
  std::vector<ClassLabel> labels_;
  std::vector<Provenance> provenance_;

  std::optional<IvfIndex> ivf_;
  bool ivf_dirty_ = false;
};

}  // namespace adanpc
