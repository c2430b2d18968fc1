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

#include "adanpc/memory_bank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "adanpc/core_math.hpp"
#include "adanpc/error.hpp"
#include "adanpc/kmeans.hpp"

namespace adanpc {
namespace {

// Orders neighbors best-first: higher similarity, then lower id.
bool better(const Neighbor& a, const Neighbor& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.id < b.id;
}

// Bounded best-k collector. The heap top is the worst kept neighbor.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

  void offer(EntryId id, double sim) {
    Neighbor n{id, sim};
    if (heap_.size() < k_) {
      heap_.push_back(n);
      std::push_heap(heap_.begin(), heap_.end(), better);
    } else if (better(n, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), better);
      heap_.back() = n;
      std::push_heap(heap_.begin(), heap_.end(), better);
    }
  }

  NeighborSet take() {
    std::sort(heap_.begin(), heap_.end(), better);
    return std::move(heap_);
  }

 private:
  std::size_t k_;
  std::vector<Neighbor> heap_;
};

}  // namespace

MemoryBank::MemoryBank(std::size_t dim, std::uint32_t num_classes,
                       std::optional<std::size_t> capacity)
    : dim_(dim), num_classes_(num_classes), capacity_(capacity) {
  if (dim == 0) throw Error(ErrorCode::kBadParams, "bank dimension must be positive");
  if (num_classes == 0) throw Error(ErrorCode::kBadParams, "bank needs at least one class");
  if (capacity && *capacity == 0) throw Error(ErrorCode::kBadParams, "capacity must be positive");
}

MemoryBank MemoryBank::from_entries(std::size_t dim, std::uint32_t num_classes,
                                    std::optional<std::size_t> capacity,
                                    std::vector<MemoryEntry> entries, EntryId next_id) {
  MemoryBank bank(dim, num_classes, capacity);
  if (capacity && entries.size() > *capacity) {
    throw Error(ErrorCode::kBadParams, "more entries than the bank capacity");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const MemoryEntry& e = entries[i];
    if (i > 0 && e.id <= entries[i - 1].id) {
      throw Error(ErrorCode::kBadParams, "entry ids must be strictly increasing");
    }
    bank.check_feature(e.feature);
    if (e.label >= num_classes) throw Error(ErrorCode::kLabelOutOfRange, "stored label");
    double norm = l2_norm(std::span<const float>(e.feature));
    if (norm < kMinNorm) throw Error(ErrorCode::kZeroNorm, "stored feature has zero norm");
    bank.features_.insert(bank.features_.end(), e.feature.begin(), e.feature.end());
    bank.norms_.push_back(norm);
    bank.ids_.push_back(e.id);
    bank.labels_.push_back(e.label);
    bank.provenance_.push_back(e.provenance);
  }
  EntryId min_next = entries.empty() ? 0 : entries.back().id + 1;
  bank.next_id_ = std::max(next_id, min_next);
  return bank;
}

void MemoryBank::check_feature(std::span<const float> feature) const {
  if (feature.size() != dim_) {
    throw Error(ErrorCode::kDimMismatch, "feature has length " + std::to_string(feature.size()) +
                                             ", bank dimension is " + std::to_string(dim_));
  }
  for (float v : feature) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kBadParams, "feature has non-finite values");
  }
}

EntryId MemoryBank::insert(std::span<const float> feature, ClassLabel label,
                           Provenance provenance) {
  check_feature(feature);
  if (label >= num_classes_) {
    throw Error(ErrorCode::kLabelOutOfRange, "label " + std::to_string(label) + " >= " +
                                                 std::to_string(num_classes_));
  }
  std::vector<float> unit = normalized(feature);
  if (capacity_ && ids_.size() >= *capacity_) evict_front();
  features_.insert(features_.end(), unit.begin(), unit.end());
  norms_.push_back(l2_norm(std::span<const float>(unit)));
  EntryId id = next_id_++;
  ids_.push_back(id);
  labels_.push_back(label);
  provenance_.push_back(provenance);
  ++version_;
  return id;
}

void MemoryBank::evict_front() {
  features_.erase(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(dim_));
  norms_.erase(norms_.begin());
  ids_.erase(ids_.begin());
  labels_.erase(labels_.begin());
  provenance_.erase(provenance_.begin());
  if (ivf_) ivf_dirty_ = true;
  ++version_;
}

void MemoryBank::update_feature(EntryId id, std::span<const float> feature) {
  check_feature(feature);
  auto pos = position(id);
  if (!pos) throw Error(ErrorCode::kUnknownEntry, "no entry with id " + std::to_string(id));
  std::vector<float> unit = normalized(feature);
  std::copy(unit.begin(), unit.end(), features_.begin() + static_cast<std::ptrdiff_t>(*pos * dim_));
  norms_[*pos] = l2_norm(std::span<const float>(unit));
  if (ivf_) ivf_dirty_ = true;
  ++version_;
}

std::optional<std::size_t> MemoryBank::position(EntryId id) const {
  if (ids_.empty() || id < ids_.front() || id > ids_.back()) return std::nullopt;
  // Ids are usually contiguous, so try the direct offset first.
  std::size_t guess = static_cast<std::size_t>(id - ids_.front());
  if (guess < ids_.size() && ids_[guess] == id) return guess;
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it != ids_.end() && *it == id) return static_cast<std::size_t>(it - ids_.begin());
  return std::nullopt;
}

MemoryEntry MemoryBank::entry(EntryId id) const {
  auto pos = position(id);
  if (!pos) throw Error(ErrorCode::kUnknownEntry, "no entry with id " + std::to_string(id));
  auto f = feature_at(*pos);
  return MemoryEntry{id, std::vector<float>(f.begin(), f.end()), labels_[*pos], provenance_[*pos]};
}

std::vector<MemoryEntry> MemoryBank::entries() const {
  std::vector<MemoryEntry> out;
  out.reserve(size());
  for (std::size_t pos = 0; pos < size(); ++pos) {
    auto f = feature_at(pos);
    out.push_back({ids_[pos], std::vector<float>(f.begin(), f.end()), labels_[pos],
                   provenance_[pos]});
  }
  return out;
}

std::size_t MemoryBank::source_count() const {
  return static_cast<std::size_t>(std::count_if(provenance_.begin(), provenance_.end(),
                                                [](const Provenance& p) { return p.is_source(); }));
}

NeighborSet MemoryBank::knn_exact(std::span<const float> query, std::size_t k,
                                  const ExclusionSet& exclude) const {
  if (query.size() != dim_) throw Error(ErrorCode::kDimMismatch, "query length");
  if (k == 0) throw Error(ErrorCode::kBadParams, "k must be positive");
  double qnorm = l2_norm(query);
  if (qnorm < kMinNorm) throw Error(ErrorCode::kZeroNorm, "query has zero norm");
  TopK top(k);
  for (std::size_t pos = 0; pos < ids_.size(); ++pos) {
    if (!exclude.empty() && exclude.count(ids_[pos])) continue;
    double d = detail::dot_kernel(query.data(), features_.data() + pos * dim_, dim_);
    top.offer(ids_[pos], cosine_from_parts(d, qnorm, norms_[pos]));
  }
  NeighborSet out = top.take();
  if (out.empty()) throw Error(ErrorCode::kEmptyBank, "no searchable entries in the bank");
  return out;
}

void MemoryBank::build_ivf(const IvfBuildOptions& options) {
  if (options.n_clusters == 0) throw Error(ErrorCode::kBadParams, "n_clusters must be positive");
  if (size() < options.n_clusters) {
    throw Error(ErrorCode::kNotEnoughEntries, std::to_string(size()) + " entries for " +
                                                  std::to_string(options.n_clusters) +
                                                  " clusters");
  }
  std::size_t cap = options.max_train_points ? options.max_train_points : 256 * options.n_clusters;
  cap = std::max(cap, options.n_clusters);
  std::vector<float> train;
  if (size() <= cap) {
    train = features_;
  } else {
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(cap);
    std::sort(order.begin(), order.end());
    train.reserve(cap * dim_);
    for (std::size_t pos : order) {
      auto f = feature_at(pos);
      train.insert(train.end(), f.begin(), f.end());
    }
  }
  KMeansResult km = kmeans(train, dim_, options.n_clusters, options.iterations, options.seed);

  IvfIndex index;
  index.n_clusters = options.n_clusters;
  index.centroids = std::move(km.centroids);
  index.posting_lists.resize(options.n_clusters);
  for (std::size_t pos = 0; pos < size(); ++pos) {
    std::size_t c = nearest_centroid(index.centroids, dim_, feature_at(pos));
    index.posting_lists[c].push_back(ids_[pos]);
  }
  index.indexed_below = next_id_;
  index.indexed_count = size();
  ivf_ = std::move(index);
  ivf_dirty_ = false;
}

std::size_t MemoryBank::ivf_tail_size() const {
  if (!ivf_) return 0;
  auto it = std::lower_bound(ids_.begin(), ids_.end(), ivf_->indexed_below);
  return static_cast<std::size_t>(ids_.end() - it);
}

bool MemoryBank::ivf_stale() const {
  if (!ivf_) return false;
  return ivf_dirty_ || ivf_tail_size() > ivf_->indexed_count;
}

NeighborSet MemoryBank::knn_ivf(std::span<const float> query, std::size_t k, std::size_t nprobe,
                                const ExclusionSet& exclude) const {
  if (!ivf_) throw Error(ErrorCode::kIndexMissing, "build_ivf has not been called");
  if (query.size() != dim_) throw Error(ErrorCode::kDimMismatch, "query length");
  if (k == 0) throw Error(ErrorCode::kBadParams, "k must be positive");
  if (nprobe == 0 || nprobe > ivf_->n_clusters) {
    throw Error(ErrorCode::kBadParams, "nprobe must be in [1, n_clusters]");
  }
  double qnorm = l2_norm(query);
  if (qnorm < kMinNorm) throw Error(ErrorCode::kZeroNorm, "query has zero norm");

  // Rank centroids against the unit query; centroids live near the sphere.
  std::vector<float> unit(dim_);
  for (std::size_t i = 0; i < dim_; ++i) unit[i] = static_cast<float>(query[i] / qnorm);
  std::vector<std::pair<double, std::size_t>> order(ivf_->n_clusters);
  for (std::size_t c = 0; c < ivf_->n_clusters; ++c) {
    order[c] = {sq_dist(unit.data(), ivf_->centroids.data() + c * dim_, dim_), c};
  }
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nprobe),
                    order.end());

  TopK top(k);
  auto scan = [&](std::size_t pos) {
    if (!exclude.empty() && exclude.count(ids_[pos])) return;
    double d = detail::dot_kernel(query.data(), features_.data() + pos * dim_, dim_);
    top.offer(ids_[pos], cosine_from_parts(d, qnorm, norms_[pos]));
  };
  for (std::size_t p = 0; p < nprobe; ++p) {
    for (EntryId id : ivf_->posting_lists[order[p].second]) {
      if (auto pos = position(id)) scan(*pos);
    }
  }
  auto tail = std::lower_bound(ids_.begin(), ids_.end(), ivf_->indexed_below);
  for (auto pos = static_cast<std::size_t>(tail - ids_.begin()); pos < ids_.size(); ++pos) {
    scan(pos);
  }
  NeighborSet out = top.take();
  if (out.empty()) throw Error(ErrorCode::kEmptyBank, "no searchable entries in the probed lists");
  return out;
}

}  // namespace adanpc
