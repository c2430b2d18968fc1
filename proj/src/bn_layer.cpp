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

#include "adanpc/bn_layer.hpp"

#include "adanpc/error.hpp"

namespace adanpc {
namespace {

void check_dim(const BnLayer& layer, Eigen::Index n) {
  if (n != layer.gamma.size()) {
    throw Error(ErrorCode::kDimMismatch, "BN layer has dim " + std::to_string(layer.gamma.size()) +
                                             ", input has " + std::to_string(n));
  }
}

}  // namespace

BnLayer BnLayer::identity(std::size_t dim, double momentum) {
  BnLayer l;
  auto n = static_cast<Eigen::Index>(dim);
  l.gamma = Eigen::VectorXd::Ones(n);
  l.beta = Eigen::VectorXd::Zero(n);
  l.running_mean = Eigen::VectorXd::Zero(n);
  l.running_var = Eigen::VectorXd::Ones(n);
  l.momentum = momentum;
  return l;
}

Eigen::VectorXd BnLayer::normalize(const Eigen::VectorXd& x) const {
  check_dim(*this, x.size());
  return ((x - running_mean).array() / (running_var.array() + eps).sqrt()).matrix();
}

Eigen::VectorXd bn_forward_eval(const BnLayer& layer, const Eigen::VectorXd& x) {
  return (layer.gamma.array() * layer.normalize(x).array() + layer.beta.array()).matrix();
}

Eigen::VectorXd bn_forward_stream(BnLayer& layer, const Eigen::VectorXd& x) {
  check_dim(layer, x.size());
  const double m = layer.momentum;
  Eigen::VectorXd delta = x - layer.running_mean;
  layer.running_mean += m * delta;
  layer.running_var = ((1.0 - m) * (layer.running_var.array() + m * delta.array().square())).matrix();
  return bn_forward_eval(layer, x);
}

Eigen::MatrixXd bn_forward_train(BnLayer& layer, const Eigen::MatrixXd& batch) {
  check_dim(layer, batch.cols());
  if (batch.rows() == 0) throw Error(ErrorCode::kEmptyInput, "empty BN batch");
  const double n = static_cast<double>(batch.rows());
  Eigen::RowVectorXd mean = batch.colwise().mean();
  Eigen::MatrixXd centered = batch.rowwise() - mean;
  Eigen::RowVectorXd var = centered.array().square().colwise().sum() / n;
  Eigen::MatrixXd out(batch.rows(), batch.cols());
  for (Eigen::Index j = 0; j < batch.cols(); ++j) {
    double inv = 1.0 / std::sqrt(var(j) + layer.eps);
    out.col(j) = (centered.col(j) * inv * layer.gamma(j)).array() + layer.beta(j);
  }
  Eigen::RowVectorXd unbiased = batch.rows() > 1 ? Eigen::RowVectorXd(var * n / (n - 1.0)) : var;
  const double m = layer.momentum;
  layer.running_mean = (1.0 - m) * layer.running_mean + m * mean.transpose();
  layer.running_var = (1.0 - m) * layer.running_var + m * unbiased.transpose();
  return out;
}

}  // namespace adanpc
