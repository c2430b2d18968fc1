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

// A single batch-normalization layer over feature vectors.

#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace adanpc {

struct BnLayer {
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  /// gamma = 1, beta = 0, running stats (0, 1).
  static BnLayer identity(std::size_t dim, double momentum = 0.1);

  std::size_t dim() const { return static_cast<std::size_t>(gamma.size()); }
  /// (x - running_mean) / sqrt(running_var + eps), before the affine part.
  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const;
};

/// Running statistics, then affine. Stateless.
Eigen::VectorXd bn_forward_eval(const BnLayer& layer, const Eigen::VectorXd& x);

/// Single-sample streaming mode: running stats are updated as an EMA with
/// the layer momentum, then x is normalized by the updated stats.
Eigen::VectorXd bn_forward_stream(BnLayer& layer, const Eigen::VectorXd& x);

/// Batch mode over the rows of `batch`: normalizes with the biased batch
/// statistics and folds the batch mean and unbiased variance into the
/// running stats.
Eigen::MatrixXd bn_forward_train(BnLayer& layer, const Eigen::MatrixXd& batch);

}  // namespace adanpc
