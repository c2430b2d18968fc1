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

#include "adanpc/bn_adapt.hpp"

#include <cmath>

#include "adanpc/core_math.hpp"
#include "adanpc/encoder.hpp"
#include "adanpc/error.hpp"

namespace adanpc {

namespace {

void check_inputs(const BnLayer& layer, const MemoryBank& bank,
                  const std::vector<Eigen::VectorXd>& queries) {
  if (bank.empty()) throw Error(ErrorCode::kEmptyBank, "bank has no entries");
  if (queries.empty()) throw Error(ErrorCode::kEmptyInput, "no queries");
  if (layer.dim() != bank.dim()) throw Error(ErrorCode::kDimMismatch, "BN and bank dims differ");
  for (const auto& q : queries) {
    if (static_cast<std::size_t>(q.size()) != layer.dim()) {
      throw Error(ErrorCode::kDimMismatch, "query dim differs from BN dim");
    }
  }
}

void check_plan(const std::vector<Eigen::VectorXd>& queries, const FrozenNeighbors& plan) {
  if (plan.size() != queries.size()) {
    throw Error(ErrorCode::kSizeMismatch, "one neighbor set per query is required");
  }
}

struct Forward {
  Eigen::VectorXd xhat;
  Eigen::VectorXd z;
  double z_norm = 0.0;
  std::vector<double> w;  // cosine to each frozen neighbor
  std::vector<double> probs;
  double entropy = 0.0;
};

Forward forward(const BnLayer& layer, const MemoryBank& bank, const Eigen::VectorXd& x,
                const NeighborSet& neighbors) {
  Forward f;
  f.xhat = layer.normalize(x);
  f.z = layer.gamma.cwiseProduct(f.xhat) + layer.beta;
  f.z_norm = f.z.norm();
  if (f.z_norm < kMinNorm) throw Error(ErrorCode::kZeroNorm, "BN output has zero norm");
  std::vector<double> scores(bank.num_classes(), 0.0);
  for (const Neighbor& n : neighbors) {
    std::size_t pos = *bank.position(n.id);
    auto feat = bank.feature_at(pos);
    double d = dot(std::span<const double>(f.z.data(), f.z.size()), feat);
    double w = cosine_from_parts(d, f.z_norm, l2_norm(feat));
    f.w.push_back(w);
    scores[bank.label_at(pos)] += w;
  }
  f.probs = softmax(scores);
  f.entropy = entropy(f.probs);
  return f;
}

}  // namespace

FrozenNeighbors bn_plan_neighbors(const BnLayer& layer, const MemoryBank& bank,
                                  const std::vector<Eigen::VectorXd>& queries, std::size_t k) {
  check_inputs(layer, bank, queries);
  FrozenNeighbors plan;
  for (const auto& q : queries) plan.push_back(bank.knn_exact(to_float(bn_forward_eval(layer, q)), k));
  return plan;
}

double bn_mean_entropy_frozen(const BnLayer& layer, const MemoryBank& bank,
                              const std::vector<Eigen::VectorXd>& queries,
                              const FrozenNeighbors& plan) {
  check_inputs(layer, bank, queries);
  check_plan(queries, plan);
  double total = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    total += forward(layer, bank, queries[i], plan[i]).entropy;
  }
  return total / static_cast<double>(queries.size());
}

BnGrad bn_entropy_grad_frozen(const BnLayer& layer, const MemoryBank& bank,
                              const std::vector<Eigen::VectorXd>& queries,
                              const FrozenNeighbors& plan) {
  check_inputs(layer, bank, queries);
  check_plan(queries, plan);
  const auto dim = static_cast<Eigen::Index>(layer.dim());
  BnGrad g{Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Zero(dim)};
  const double scale = 1.0 / static_cast<double>(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    Forward f = forward(layer, bank, queries[i], plan[i]);
    // dH/ds_c = -p_c (log p_c + H), with 0 log 0 := 0.
    std::vector<double> ds(f.probs.size());
    for (std::size_t c = 0; c < ds.size(); ++c) {
      double p = f.probs[c];
      ds[c] = p > 0.0 ? -p * (std::log(p) + f.entropy) : 0.0;
    }
    Eigen::VectorXd dz = Eigen::VectorXd::Zero(dim);
    for (std::size_t j = 0; j < plan[i].size(); ++j) {
      std::size_t pos = *bank.position(plan[i][j].id);
      Eigen::VectorXd feat = to_double(bank.feature_at(pos));
      double dw = ds[bank.label_at(pos)];
      dz += dw * (feat / (f.z_norm * feat.norm()) - f.w[j] * f.z / (f.z_norm * f.z_norm));
    }
    g.gamma += scale * dz.cwiseProduct(f.xhat);
    g.beta += scale * dz;
  }
  return g;
}

BnEntropyStep bn_entropy_step(const BnLayer& layer, const MemoryBank& bank,
                              const std::vector<Eigen::VectorXd>& queries, std::size_t k,
                              double lr) {
  if (!(lr >= 0.0)) throw Error(ErrorCode::kBadParams, "lr must be >= 0");
  if (k == 0) throw Error(ErrorCode::kBadParams, "k must be >= 1");
  FrozenNeighbors plan = bn_plan_neighbors(layer, bank, queries, k);
  BnEntropyStep out{layer, 0.0, 0.0, 0.0, {}};
  out.entropy_before = bn_mean_entropy_frozen(layer, bank, queries, plan);
  out.grad = bn_entropy_grad_frozen(layer, bank, queries, plan);
  if (lr > 0.0) {
    out.layer.gamma -= lr * out.grad.gamma;
    out.layer.beta -= lr * out.grad.beta;
  }
  out.entropy_after_frozen = bn_mean_entropy_frozen(out.layer, bank, queries, plan);
  out.entropy_after = bn_mean_entropy_frozen(
      out.layer, bank, queries, bn_plan_neighbors(out.layer, bank, queries, k));
  return out;
}

}  // namespace adanpc
