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

// Numeric primitives shared by every module. All functions are pure.
//
// Reductions use 64-bit accumulators in a fixed order, so two call sites
// that feed the same inputs get bit-identical results. Several oracle tests
// rely on that.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace adanpc {

/// Norms below this are treated as zero.
inline constexpr double kMinNorm = 1e-30;

namespace detail {

// f64 dot product with four interleaved accumulators. Every dot product and
// norm in the library goes through this one kernel so that results agree
// across call sites.
template <typename A, typename B>
inline double dot_kernel(const A* a, const B* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    s1 += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
    s2 += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
    s3 += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
  }
  for (; i < n; ++i) s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

double dot(std::span<const double> a, std::span<const double> b);
double dot(std::span<const float> a, std::span<const float> b);
double dot(std::span<const double> a, std::span<const float> b);

double l2_norm(std::span<const double> a);
double l2_norm(std::span<const float> a);

double squared_l2_distance(std::span<const double> a, std::span<const double> b);

/// aᵀb / (‖a‖‖b‖), clamped to [-1, 1]. Throws ZeroNorm / DimMismatch.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_similarity(std::span<const float> a, std::span<const float> b);
double cosine_similarity(std::span<const double> a, std::span<const float> b);

/// Cosine from a precomputed dot product and both norms; shared by the
/// memory bank scan so the bank and the free function agree bit-for-bit.
inline double cosine_from_parts(double dot_ab, double norm_a, double norm_b) {
  double c = dot_ab / (norm_a * norm_b);
  if (c > 1.0) return 1.0;
  if (c < -1.0) return -1.0;
  return c;
}

/// Max-shifted softmax. Throws EmptyInput on an empty sequence.
std::vector<double> softmax(std::span<const double> scores);

/// Shannon entropy in nats with 0·ln 0 := 0.
double entropy(std::span<const double> probs);

/// Volume of the unit ball in d dimensions: π^{d/2} / Γ(d/2 + 1).
double unit_ball_volume(int d);

/// Index of the largest element; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

/// L2-normalized float copy of v. Throws ZeroNorm.
std::vector<float> normalized(std::span<const float> v);

}  // namespace adanpc
