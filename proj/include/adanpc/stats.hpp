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

#include <span>

namespace adanpc::stats {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean (sample sd / sqrt(n))
};

MeanSe mean_se(std::span<const double> values);

struct PairedTest {
  double mean_diff = 0.0;  // mean of (a - b)
  double se = 0.0;
  double t = 0.0;
  double p_value = 1.0;  // one-sided
};

/// One-sided paired t-test of H1: mean(a - b) < 0.
/// A zero-variance difference yields p = 0 when the mean is negative and
/// p = 1 otherwise.
PairedTest paired_t_test_less(std::span<const double> a, std::span<const double> b);

}  // namespace adanpc::stats
