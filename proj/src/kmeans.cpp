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

#include "adanpc/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "adanpc/error.hpp"

namespace adanpc {

double sq_dist(const float* a, const float* b, std::size_t dim) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= dim; i += 4) {
    double d0 = static_cast<double>(a[i]) - b[i];
    double d1 = static_cast<double>(a[i + 1]) - b[i + 1];
    double d2 = static_cast<double>(a[i + 2]) - b[i + 2];
    double d3 = static_cast<double>(a[i + 3]) - b[i + 3];
    s0 += d0 * d0;
    s1 += d1 * d1;
    s2 += d2 * d2;
    s3 += d3 * d3;
  }
  for (; i < dim; ++i) {
    double d = static_cast<double>(a[i]) - b[i];
    s0 += d * d;
  }
  return (s0 + s1) + (s2 + s3);
}

std::size_t nearest_centroid(std::span<const float> centroids, std::size_t dim,
                             std::span<const float> x) {
  std::size_t k = centroids.size() / dim;
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    double d = sq_dist(centroids.data() + c * dim, x.data(), dim);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

KMeansResult kmeans(std::span<const float> points, std::size_t dim, std::size_t k,
                    int iterations, std::uint64_t seed) {
  if (dim == 0 || points.size() % dim != 0) {
    throw Error(ErrorCode::kDimMismatch, "kmeans: point buffer is not n x dim");
  }
  const std::size_t n = points.size() / dim;
  if (k == 0 || n < k) {
    throw Error(ErrorCode::kNotEnoughEntries,
                "kmeans: " + std::to_string(n) + " points for " + std::to_string(k) + " clusters");
  }
  std::mt19937_64 rng(seed);
  KMeansResult out;
  out.centroids.resize(k * dim);
  out.assignment.assign(n, 0);
  auto point = [&](std::size_t i) { return points.data() + i * dim; };
  auto centroid = [&](std::size_t c) { return out.centroids.data() + c * dim; };

  // k-means++ seeding.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  std::copy_n(point(first), dim, centroid(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(point(i), centroid(c - 1), dim));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      double run = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        run += d2[i];
        if (run >= r && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
    std::copy_n(point(pick), dim, centroid(c));
  }

  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  for (int iter = 0; iter < iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      out.assignment[i] = static_cast<std::uint32_t>(
          nearest_centroid(out.centroids, dim, {point(i), dim}));
    }
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t c = out.assignment[i];
      ++counts[c];
      for (std::size_t j = 0; j < dim; ++j) sums[c * dim + j] += point(i)[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j) {
        centroid(c)[j] = static_cast<float>(sums[c * dim + j] / static_cast<double>(counts[c]));
      }
    }
    // Re-seed empty clusters from the largest one.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t largest = static_cast<std::size_t>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (out.assignment[i] != largest) continue;
        double d = sq_dist(point(i), centroid(largest), dim);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      std::copy_n(point(far), dim, centroid(c));
      out.assignment[far] = static_cast<std::uint32_t>(c);
      --counts[largest];
      counts[c] = 1;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.assignment[i] =
        static_cast<std::uint32_t>(nearest_centroid(out.centroids, dim, {point(i), dim}));
  }
  return out;
}

}  // namespace adanpc
