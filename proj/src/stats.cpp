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

#include "adanpc/stats.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <vector>

#include "adanpc/error.hpp"

namespace adanpc::stats {

MeanSe mean_se(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "mean_se of no values");
  double sum = 0.0;
  for (double v : values) sum += v;
  MeanSe out;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    double var = ss / static_cast<double>(values.size() - 1);
    out.se = std::sqrt(var / static_cast<double>(values.size()));
  }
  return out;
}

PairedTest paired_t_test_less(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kSizeMismatch, "paired test sizes differ");
  if (a.size() < 2) throw Error(ErrorCode::kEmptyInput, "paired test needs >= 2 pairs");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  MeanSe ms = mean_se(diff);
  PairedTest out;
  out.mean_diff = ms.mean;
  out.se = ms.se;
  if (ms.se <= 0.0) {
    out.t = ms.mean < 0.0 ? -INFINITY : (ms.mean > 0.0 ? INFINITY : 0.0);
    out.p_value = ms.mean < 0.0 ? 0.0 : 1.0;
    return out;
  }
  out.t = ms.mean / ms.se;
  boost::math::students_t dist(static_cast<double>(a.size() - 1));
  out.p_value = boost::math::cdf(dist, out.t);
  return out;
}

}  // namespace adanpc::stats
