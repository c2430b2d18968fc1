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

#include "adanpc/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "adanpc/error.hpp"

namespace adanpc {
namespace {

template <typename A, typename B>
double dot_impl(std::span<const A> a, std::span<const B> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimMismatch, "dot: lengths " + std::to_string(a.size()) +
                                             " and " + std::to_string(b.size()));
  }
  return detail::dot_kernel(a.data(), b.data(), a.size());
}

template <typename T>
double norm_impl(std::span<const T> a) {
  return std::sqrt(detail::dot_kernel(a.data(), a.data(), a.size()));
}

template <typename A, typename B>
double cosine_impl(std::span<const A> a, std::span<const B> b) {
  double d = dot_impl(a, b);
  double na = norm_impl(a);
  double nb = norm_impl(b);
  if (na < kMinNorm || nb < kMinNorm) {
    throw Error(ErrorCode::kZeroNorm, "cosine_similarity of a zero vector");
  }
  return cosine_from_parts(d, na, nb);
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) { return dot_impl(a, b); }
double dot(std::span<const float> a, std::span<const float> b) { return dot_impl(a, b); }
double dot(std::span<const double> a, std::span<const float> b) { return dot_impl(a, b); }

double l2_norm(std::span<const double> a) { return norm_impl(a); }
double l2_norm(std::span<const float> a) { return norm_impl(a); }

double squared_l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kDimMismatch, "squared_l2_distance");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  return cosine_impl(a, b);
}
double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  return cosine_impl(a, b);
}
double cosine_similarity(std::span<const double> a, std::span<const float> b) {
  return cosine_impl(a, b);
}

std::vector<double> softmax(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorCode::kEmptyInput, "softmax of an empty sequence");
  double max_score = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - max_score);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double unit_ball_volume(int d) {
  if (d < 1) throw Error(ErrorCode::kBadParams, "unit_ball_volume needs d >= 1");
  double half = 0.5 * d;
  return std::exp(half * std::log(std::numbers::pi) - std::lgamma(half + 1.0));
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "argmax of an empty sequence");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<float> normalized(std::span<const float> v) {
  double n = norm_impl(v);
  if (n < kMinNorm) throw Error(ErrorCode::kZeroNorm, "cannot normalize a zero vector");
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(v[i]) / n);
  }
  return out;
}

}  // namespace adanpc
