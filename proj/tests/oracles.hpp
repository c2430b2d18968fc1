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

// Independent reference computations used by the unit tests and the
// acceptance gate. Nothing here calls the loss or entropy code under test;
// gradients are compared against central differences of these re-derived
// objectives.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "adanpc/bn_adapt.hpp"
#include "adanpc/classifier.hpp"
#include "adanpc/core_math.hpp"
#include "adanpc/encoder.hpp"
#include "adanpc/trainer.hpp"
#include "test_util.hpp"

namespace adanpc::oracle {

// |a - n| / max(|a|, |n|, floor). The floor keeps exact zeros (dead ReLU
// units) from dividing difference noise by zero.
inline double rel_err(double a, double n, double floor = 1e-6) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

// Straight re-evaluation of the mean KNN loss with unshifted exponentials.
inline double knn_loss_reference(const EncoderParams& params, const Dataset& batch,
                                 const NeighborPlan& plan, double tau, double eps) {
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Eigen::VectorXd h = batch[i].x;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      h = params.layers[l].weight.transpose() * h + params.layers[l].bias;
      if (l + 1 < params.layers.size()) h = h.cwiseMax(0.0);
    }
    double all = 0.0, pos = 0.0;
    for (Eigen::Index r = 0; r < plan[i].features.rows(); ++r) {
      Eigen::VectorXd f = plan[i].features.row(r).transpose();
      double w = f.dot(h) / (f.norm() * h.norm());
      double e = std::exp(w / tau);
      all += e;
      if (plan[i].positive[static_cast<std::size_t>(r)]) pos += e;
    }
    total += -std::log((pos + eps) / (all + eps));
  }
  return total / static_cast<double>(batch.size());
}

struct KnnFdInstance {
  EncoderParams params;
  Dataset batch;
  MemoryBank bank{1, 1};
  KnnLossConfig config;
};

// Random 2-4-3 net, bank of 8 encodings with 3 classes, batch of 2.
inline KnnFdInstance make_knn_fd_instance(std::uint64_t seed, double tau = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  KnnFdInstance inst;
  inst.params = make_encoder({2, 4, 3}, seed);
  for (auto& layer : inst.params.layers) {
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = 0.3 * nd(rng);
  }
  inst.bank = MemoryBank(3, 3);
  for (int j = 0; j < 8; ++j) {
    std::vector<float> f(3);
    for (auto& v : f) v = static_cast<float>(nd(rng));
    inst.bank.insert(f, static_cast<ClassLabel>(j % 3), Provenance::source(0));
  }
  for (int b = 0; b < 2; ++b) {
    Sample s;
    s.x = Eigen::Vector2d(nd(rng), nd(rng));
    s.y = static_cast<ClassLabel>(rng() % 3);
    inst.batch.push_back(s);
  }
  inst.config.k = 5;
  inst.config.tau = tau;
  return inst;
}

// Max relative error between knn_loss_grad_planned and central differences
// of knn_loss_reference, neighbor sets frozen.
inline double knn_grad_fd_error(std::uint64_t seed, double tau = 0.1, double h = 1e-6) {
  KnnFdInstance inst = make_knn_fd_instance(seed, tau);
  NeighborPlan plan = plan_neighbors(inst.params, inst.batch, inst.bank, inst.config);
  LayerTensors g = knn_loss_grad_planned(inst.params, inst.batch, plan, inst.config);
  const double eps = inst.config.epsilon_log;
  double worst = 0.0;
  auto probe = [&](double& slot, double analytic) {
    const double keep = slot;
    slot = keep + h;
    double up = knn_loss_reference(inst.params, inst.batch, plan, tau, eps);
    slot = keep - h;
    double down = knn_loss_reference(inst.params, inst.batch, plan, tau, eps);
    slot = keep;
    worst = std::max(worst, rel_err(analytic, (up - down) / (2 * h)));
  };
  for (std::size_t l = 0; l < inst.params.layers.size(); ++l) {
    auto& layer = inst.params.layers[l];
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      probe(layer.weight.data()[i], g[l].weight.data()[i]);
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) probe(layer.bias(i), g[l].bias(i));
  }
  return worst;
}

// Mean prediction entropy through eval-mode BN and a frozen neighbor plan.
inline double bn_entropy_reference(const BnLayer& layer, const MemoryBank& bank,
                                   const std::vector<Eigen::VectorXd>& queries,
                                   const FrozenNeighbors& plan) {
  double total = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    Eigen::ArrayXd xhat = (queries[i] - layer.running_mean).array() /
                          (layer.running_var.array() + layer.eps).sqrt();
    Eigen::VectorXd z = (layer.gamma.array() * xhat + layer.beta.array()).matrix();
    std::vector<double> score(bank.num_classes(), 0.0);
    for (const Neighbor& n : plan[i]) {
      const MemoryEntry e = bank.entry(n.id);
      Eigen::VectorXd f(static_cast<Eigen::Index>(e.feature.size()));
      for (std::size_t d = 0; d < e.feature.size(); ++d) f(static_cast<Eigen::Index>(d)) = e.feature[d];
      score[e.label] += f.dot(z) / (f.norm() * z.norm());
    }
    double zsum = 0.0;
    for (double s : score) zsum += std::exp(s);
    double h = 0.0;
    for (double s : score) {
      double p = std::exp(s) / zsum;
      h -= p * std::log(p);
    }
    total += h;
  }
  return total / static_cast<double>(queries.size());
}

struct BnFdInstance {
  BnLayer layer;
  MemoryBank bank{1, 1};
  std::vector<Eigen::VectorXd> queries;
  std::size_t k = 5;
};

inline BnFdInstance make_bn_fd_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.5, 1.5);
  const std::size_t dim = 4;
  BnFdInstance inst;
  inst.layer = BnLayer::identity(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    auto i = static_cast<Eigen::Index>(d);
    inst.layer.gamma(i) = ud(rng);
    inst.layer.beta(i) = 0.3 * nd(rng);
    inst.layer.running_mean(i) = 0.2 * nd(rng);
    inst.layer.running_var(i) = ud(rng);
  }
  inst.bank = MemoryBank(dim, 3);
  for (int j = 0; j < 12; ++j) {
    std::vector<float> f(dim);
    for (auto& v : f) v = static_cast<float>(nd(rng));
    inst.bank.insert(f, static_cast<ClassLabel>(j % 3), Provenance::source(0));
  }
  for (int q = 0; q < 3; ++q) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = nd(rng);
    inst.queries.push_back(x);
  }
  return inst;
}

inline double bn_grad_fd_error(std::uint64_t seed, double h = 1e-6) {
  BnFdInstance inst = make_bn_fd_instance(seed);
  FrozenNeighbors plan = bn_plan_neighbors(inst.layer, inst.bank, inst.queries, inst.k);
  BnGrad g = bn_entropy_grad_frozen(inst.layer, inst.bank, inst.queries, plan);
  double worst = 0.0;
  auto probe = [&](double& slot, double analytic) {
    const double keep = slot;
    slot = keep + h;
    double up = bn_entropy_reference(inst.layer, inst.bank, inst.queries, plan);
    slot = keep - h;
    double down = bn_entropy_reference(inst.layer, inst.bank, inst.queries, plan);
    slot = keep;
    worst = std::max(worst, rel_err(analytic, (up - down) / (2 * h)));
  };
  for (Eigen::Index i = 0; i < inst.layer.gamma.size(); ++i) {
    probe(inst.layer.gamma(i), g.gamma(i));
    probe(inst.layer.beta(i), g.beta(i));
  }
  return worst;
}

struct BruteVote {
  std::vector<double> probs;
  ClassLabel label;
  std::vector<EntryId> ids;
};

// Sort every entry, sum the top-k per class, textbook softmax.
inline BruteVote brute_predict(const MemoryBank& bank, std::span<const float> q, std::size_t k,
                               const ExclusionSet& ex = {}) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t pos = 0; pos < bank.size(); ++pos) {
    if (ex.count(bank.id_at(pos))) continue;
    all.push_back({cosine_similarity(q, bank.feature_at(pos)), pos});
  }
  std::sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : bank.id_at(a.second) < bank.id_at(b.second);
  });
  all.resize(std::min(k, all.size()));
  std::vector<double> score(bank.num_classes(), 0.0);
  BruteVote v;
  for (const auto& [s, pos] : all) {
    score[bank.label_at(pos)] += s;
    v.ids.push_back(bank.id_at(pos));
  }
  double m = *std::max_element(score.begin(), score.end());
  double z = 0;
  for (double s : score) z += std::exp(s - m);
  for (double s : score) v.probs.push_back(std::exp(s - m) / z);
  v.label = static_cast<ClassLabel>(std::max_element(v.probs.begin(), v.probs.end()) - v.probs.begin());
  return v;
}

// Recall@10 of knn_ivf against knn_exact on a seeded 10k-vector Gaussian
// mixture (d 64, 20 components, 64 lists), averaged over 100 queries.
inline double ivf_recall_10k(std::size_t nprobe) {
  std::mt19937_64 rng(2026);
  const std::size_t dim = 64, n = 10000, comps = 20;
  std::vector<std::vector<float>> centers;
  for (std::size_t c = 0; c < comps; ++c) centers.push_back(testing::random_feature(rng, dim));
  std::normal_distribution<float> nd(0.0f, 0.5f);
  MemoryBank bank(dim, 2);
  for (std::size_t i = 0; i < n; ++i) {
    auto f = centers[rng() % comps];
    for (auto& v : f) v += nd(rng);
    bank.insert(f, 0, Provenance::source(0));
  }
  bank.build_ivf({64, 1, 10, 0});
  double recall = 0;
  for (int qi = 0; qi < 100; ++qi) {
    auto q = centers[rng() % comps];
    for (auto& v : q) v += nd(rng);
    auto exact = bank.knn_exact(q, 10);
    auto approx = bank.knn_ivf(q, 10, nprobe);
    std::size_t hit = 0;
    for (const auto& a : approx) {
      for (const auto& e : exact) hit += a.id == e.id;
    }
    recall += static_cast<double>(hit) / 10.0;
  }
  return recall / 100.0;
}

}  // namespace adanpc::oracle
