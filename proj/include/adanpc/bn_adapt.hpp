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

// Test-time entropy minimization over the affine parameters of one BN
// layer placed in front of the KNN classifier.
//
// For a query x the classifier sees z = gamma * xhat + beta, where xhat is
// x normalized by the running statistics. With the neighbor set N frozen,
// the class scores are s_c = sum_{j in N, y_j = c} cos(z, f_j) and the
// entropy of softmax(s) is differentiated in closed form.

#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "adanpc/bn_layer.hpp"
#include "adanpc/memory_bank.hpp"

namespace adanpc {

/// One neighbor set per query, searched on the BN output.
using FrozenNeighbors = std::vector<NeighborSet>;

FrozenNeighbors bn_plan_neighbors(const BnLayer& layer, const MemoryBank& bank,
                                  const std::vector<Eigen::VectorXd>& queries, std::size_t k);

/// Mean prediction entropy over the queries with neighbor sets held fixed.
double bn_mean_entropy_frozen(const BnLayer& layer, const MemoryBank& bank,
                              const std::vector<Eigen::VectorXd>& queries,
                              const FrozenNeighbors& plan);

struct BnGrad {
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
};

/// Gradient of bn_mean_entropy_frozen with respect to (gamma, beta).
BnGrad bn_entropy_grad_frozen(const BnLayer& layer, const MemoryBank& bank,
                              const std::vector<Eigen::VectorXd>& queries,
                              const FrozenNeighbors& plan);

struct BnEntropyStep {
  BnLayer layer;                     // after the update
  double entropy_before = 0.0;
  double entropy_after = 0.0;        // neighbors re-searched on the new layer
  double entropy_after_frozen = 0.0; // original neighbor sets
  BnGrad grad;
};

/// One gradient-descent step of rate lr on the mean entropy. Throws
/// EmptyBank, EmptyInput, DimMismatch, BadParams (lr < 0).
BnEntropyStep bn_entropy_step(const BnLayer& layer, const MemoryBank& bank,
                              const std::vector<Eigen::VectorXd>& queries, std::size_t k,
                              double lr);

}  // namespace adanpc
