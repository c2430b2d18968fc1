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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace adanpc {

struct KMeansResult {
  std::vector<float> centroids;          // k x dim, row-major
  std::vector<std::uint32_t> assignment;  // per input point
};

/// Squared L2 distance in f64.
double sq_dist(const float* a, const float* b, std::size_t dim);

/// Lloyd's k-means with k-means++ seeding. Empty clusters are re-seeded
/// with the member of the largest cluster farthest from its centroid.
/// Deterministic for a given seed. `points` is n x dim, row-major.
KMeansResult kmeans(std::span<const float> points, std::size_t dim, std::size_t k,
                    int iterations, std::uint64_t seed);

/// Index of the centroid nearest to `x` in squared L2 (lowest index on ties).
std::size_t nearest_centroid(std::span<const float> centroids, std::size_t dim,
                             std::span<const float> x);

}  // namespace adanpc
