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

#include "adanpc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "adanpc/classifier.hpp"
#include "adanpc/core_math.hpp"
#include "adanpc/error.hpp"

namespace adanpc {

void KnnLossConfig::validate() const {
  if (k == 0) throw Error(ErrorCode::kBadParams, "k must be >= 1");
  if (!(tau > 0.0)) throw Error(ErrorCode::kBadParams, "tau must be > 0");
  if (!(epsilon_log > 0.0 && epsilon_log <= 1e-6)) {
    throw Error(ErrorCode::kBadParams, "epsilon_log must be in (0, 1e-6]");
  }
  if (bank_capacity == 0) throw Error(ErrorCode::kBadParams, "bank_capacity must be >= 1");
  if (refresh_period == 0) throw Error(ErrorCode::kBadParams, "refresh_period must be >= 1");
  if (batch_size == 0) throw Error(ErrorCode::kBadParams, "batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw Error(ErrorCode::kBadParams, "learning_rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(ErrorCode::kBadParams, "Adam betas must be in [0, 1)");
  }
}

void to_json(nlohmann::json& j, const KnnLossConfig& c) {
  j = {{"k", c.k},
       {"tau", c.tau},
       {"bank_capacity", c.bank_capacity},
       {"refresh_period", c.refresh_period},
       {"epsilon_log", c.epsilon_log},
       {"learning_rate", c.learning_rate},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"batch_size", c.batch_size},
       {"iterations", c.iterations}};
}

void from_json(const nlohmann::json& j, KnnLossConfig& c) {
  c.k = j.value("k", c.k);
  c.tau = j.value("tau", c.tau);
  c.bank_capacity = j.value("bank_capacity", c.bank_capacity);
  c.refresh_period = j.value("refresh_period", c.refresh_period);
  c.epsilon_log = j.value("epsilon_log", c.epsilon_log);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.iterations = j.value("iterations", c.iterations);
}

std::uint32_t num_classes_of(const Dataset& dataset) {
  ClassLabel hi = 0;
  for (const auto& s : dataset) hi = std::max(hi, s.y);
  return dataset.empty() ? 0 : hi + 1;
}

NeighborPlan plan_neighbors(const EncoderParams& params, std::span<const Sample> batch,
                            const MemoryBank& bank, const KnnLossConfig& config) {
  if (bank.empty()) throw Error(ErrorCode::kEmptyBank, "training bank is empty");
  if (batch.empty()) throw Error(ErrorCode::kEmptyInput, "empty batch");
  NeighborPlan plan;
  plan.reserve(batch.size());
  for (const Sample& s : batch) {
    std::vector<float> h = to_float(encoder_forward(params, s.x));
    std::vector<float> unit = normalized(h);
    ExclusionSet self;
    for (std::size_t pos = 0; pos < bank.size(); ++pos) {
      auto f = bank.feature_at(pos);
      if (std::memcmp(f.data(), unit.data(), unit.size() * sizeof(float)) == 0) {
        self.insert(bank.id_at(pos));
      }
    }
    NeighborSet ns = bank.knn_exact(h, config.k, self);
    SampleNeighbors sn;
    sn.features.resize(static_cast<Eigen::Index>(ns.size()), static_cast<Eigen::Index>(bank.dim()));
    for (std::size_t r = 0; r < ns.size(); ++r) {
      std::size_t pos = *bank.position(ns[r].id);
      sn.ids.push_back(ns[r].id);
      sn.features.row(static_cast<Eigen::Index>(r)) = to_double(bank.feature_at(pos)).transpose();
      sn.positive.push_back(bank.label_at(pos) == s.y ? 1 : 0);
    }
    plan.push_back(std::move(sn));
  }
  return plan;
}

namespace {

// Log-domain terms of the loss. The epsilon joins both sums as one more
// exponential (log epsilon), so -log((P + eps) / (A + eps)) stays finite
// even when every positive term underflows or eps dwarfs the exponentials.
struct LogTerms {
  std::vector<double> s;  // sim / tau
  double log_all = 0.0;   // log(sum_j exp(s_j) + eps)
  double log_pos = 0.0;   // log(sum_{j positive} exp(s_j) + eps)
};

double log_sum_exp(std::span<const double> s, std::span<const std::uint8_t> mask,
                   double log_eps) {
  double m = log_eps;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (mask.empty() || mask[j]) m = std::max(m, s[j]);
  }
  double total = std::exp(log_eps - m);
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (mask.empty() || mask[j]) total += std::exp(s[j] - m);
  }
  return m + std::log(total);
}

LogTerms log_terms(std::span<const double> sims, std::span<const std::uint8_t> positive,
                   double tau, double epsilon) {
  if (sims.size() != positive.size() || sims.empty()) {
    throw Error(ErrorCode::kSizeMismatch, "knn loss needs one flag per neighbor");
  }
  LogTerms out;
  out.s.resize(sims.size());
  for (std::size_t j = 0; j < sims.size(); ++j) out.s[j] = sims[j] / tau;
  const double log_eps = std::log(epsilon);
  // An all-positive neighborhood takes the same path for both sums, so the
  // loss and its gradient come out exactly zero.
  const bool all_positive =
      std::all_of(positive.begin(), positive.end(), [](std::uint8_t p) { return p != 0; });
  out.log_all = log_sum_exp(out.s, {}, log_eps);
  out.log_pos = all_positive ? out.log_all : log_sum_exp(out.s, positive, log_eps);
  return out;
}

// Cosine similarities between an encoding and the frozen neighbor rows.
struct Sims {
  std::vector<double> w;
  std::vector<double> neighbor_norm;
  double h_norm = 0.0;
};

Sims similarities(const Eigen::VectorXd& h, const SampleNeighbors& sn) {
  Sims s;
  s.h_norm = h.norm();
  if (s.h_norm < kMinNorm) throw Error(ErrorCode::kZeroNorm, "sample encoding has zero norm");
  for (Eigen::Index r = 0; r < sn.features.rows(); ++r) {
    double fn = sn.features.row(r).norm();
    s.neighbor_norm.push_back(fn);
    s.w.push_back(cosine_from_parts(sn.features.row(r).dot(h), s.h_norm, fn));
  }
  return s;
}

void check_plan(std::span<const Sample> batch, const NeighborPlan& plan) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyInput, "empty batch");
  if (plan.size() != batch.size()) throw Error(ErrorCode::kSizeMismatch, "plan/batch size");
}

}  // namespace

double knn_sample_loss(std::span<const double> sims, std::span<const std::uint8_t> positive,
                       double tau, double epsilon) {
  LogTerms t = log_terms(sims, positive, tau, epsilon);
  return t.log_all - t.log_pos;
}

std::vector<double> knn_sample_loss_grad(std::span<const double> sims,
                                         std::span<const std::uint8_t> positive, double tau,
                                         double epsilon) {
  LogTerms t = log_terms(sims, positive, tau, epsilon);
  std::vector<double> g(sims.size());
  for (std::size_t j = 0; j < sims.size(); ++j) {
    double a = std::exp(t.s[j] - t.log_all);
    double p = positive[j] ? std::exp(t.s[j] - t.log_pos) : 0.0;
    g[j] = (a - p) / tau;
  }
  return g;
}

LossResult knn_loss_planned(const EncoderParams& params, std::span<const Sample> batch,
                            const NeighborPlan& plan, const KnnLossConfig& config) {
  check_plan(batch, plan);
  LossResult out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Sims s = similarities(encoder_forward(params, batch[i].x), plan[i]);
    out.per_sample.push_back(
        knn_sample_loss(s.w, plan[i].positive, config.tau, config.epsilon_log));
  }
  out.loss = std::accumulate(out.per_sample.begin(), out.per_sample.end(), 0.0) /
             static_cast<double>(batch.size());
  return out;
}

LayerTensors knn_loss_grad_planned(const EncoderParams& params, std::span<const Sample> batch,
                                   const NeighborPlan& plan, const KnnLossConfig& config) {
  check_plan(batch, plan);
  LayerTensors grads = zeros_like(params);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ForwardCache cache = encoder_forward_cached(params, batch[i].x);
    const Eigen::VectorXd& h = cache.output;
    Sims s = similarities(h, plan[i]);
    std::vector<double> dw =
        knn_sample_loss_grad(s.w, plan[i].positive, config.tau, config.epsilon_log);
    // d w_j / d h = f_j / (|h| |f_j|) - w_j h / |h|^2
    Eigen::VectorXd dh = Eigen::VectorXd::Zero(h.size());
    for (std::size_t j = 0; j < dw.size(); ++j) {
      auto r = static_cast<Eigen::Index>(j);
      dh += dw[j] * (plan[i].features.row(r).transpose() / (s.h_norm * s.neighbor_norm[j]) -
                     s.w[j] * h / (s.h_norm * s.h_norm));
    }
    encoder_backward(params, cache, scale * dh, grads);
  }
  return grads;
}

LossResult knn_loss(const EncoderParams& params, std::span<const Sample> batch,
                    const MemoryBank& bank, const KnnLossConfig& config) {
  return knn_loss_planned(params, batch, plan_neighbors(params, batch, bank, config), config);
}

LayerTensors knn_loss_grad(const EncoderParams& params, std::span<const Sample> batch,
                           const MemoryBank& bank, const KnnLossConfig& config) {
  return knn_loss_grad_planned(params, batch, plan_neighbors(params, batch, bank, config), config);
}

AdamState AdamState::zeros_like(const EncoderParams& params) {
  return {adanpc::zeros_like(params), adanpc::zeros_like(params), 0};
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::int64_t step, const AdamConfig& config) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "adam buffers differ in size");
  }
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grads[i];
    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
    params[i] -= config.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.eps);
  }
}

namespace {

template <typename M>
std::span<double> flat(M& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

}  // namespace

void adam_step(EncoderParams& params, const LayerTensors& grads, AdamState& state,
               const AdamConfig& config) {
  auto same = [](const LayerTensors& a, const EncoderParams& p) {
    if (a.size() != p.layers.size()) return false;
    for (std::size_t l = 0; l < a.size(); ++l) {
      if (a[l].weight.rows() != p.layers[l].weight.rows() ||
          a[l].weight.cols() != p.layers[l].weight.cols() ||
          a[l].bias.size() != p.layers[l].bias.size()) {
        return false;
      }
    }
    return true;
  };
  if (!same(grads, params) || !same(state.m, params) || !same(state.v, params)) {
    throw Error(ErrorCode::kShapeMismatch, "gradient or Adam state does not match the encoder");
  }
  ++state.step;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    adam_update(flat(layer.weight),
                {grads[l].weight.data(), static_cast<std::size_t>(grads[l].weight.size())},
                flat(state.m[l].weight), flat(state.v[l].weight), state.step, config);
    adam_update(flat(layer.bias),
                {grads[l].bias.data(), static_cast<std::size_t>(grads[l].bias.size())},
                flat(state.m[l].bias), flat(state.v[l].bias), state.step, config);
  }
}

TrainResult train(EncoderParams params, const Dataset& dataset, const KnnLossConfig& config,
                  std::uint64_t seed, const std::function<void(const TrainStepView&)>& on_step) {
  config.validate();
  params.validate();
  if (dataset.empty()) throw Error(ErrorCode::kEmptyInput, "training dataset is empty");
  std::mt19937_64 rng(seed);
  MemoryBank bank(params.feature_dim(), num_classes_of(dataset), config.bank_capacity);
  std::vector<std::size_t> bank_samples;

  auto push = [&](std::size_t idx, const std::vector<float>& feature) {
    if (bank.size() == config.bank_capacity) bank_samples.erase(bank_samples.begin());
    bank.insert(feature, dataset[idx].y, Provenance::source(dataset[idx].domain));
    bank_samples.push_back(idx);
  };

  // Seed the bank with distinct random samples.
  {
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(std::min(order.size(), config.bank_capacity));
    for (std::size_t idx : order) push(idx, to_float(encoder_forward(params, dataset[idx].x)));
  }

  AdamConfig adam{config.learning_rate, config.beta1, config.beta2, 1e-8};
  AdamState state = AdamState::zeros_like(params);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  TrainResult out;
  Dataset batch(config.batch_size);
  std::vector<std::size_t> batch_idx(config.batch_size);

  for (std::size_t step = 1; step <= config.iterations; ++step) {
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      batch_idx[b] = pick(rng);
      batch[b] = dataset[batch_idx[b]];
    }
    NeighborPlan plan = plan_neighbors(params, batch, bank, config);
    double loss = knn_loss_planned(params, batch, plan, config).loss;
    LayerTensors grads = knn_loss_grad_planned(params, batch, plan, config);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      push(batch_idx[b], to_float(encoder_forward(params, batch[b].x)));
    }
    adam_step(params, grads, state, adam);
    if (step % config.refresh_period == 0) {
      for (std::size_t pos = 0; pos < bank.size(); ++pos) {
        bank.update_feature(bank.id_at(pos),
                            to_float(encoder_forward(params, dataset[bank_samples[pos]].x)));
      }
    }
    if (bank.size() > config.bank_capacity) {
      throw Error(ErrorCode::kBadParams, "training bank exceeded its capacity");
    }
    out.loss_trace.push_back(loss);
    if (on_step) on_step({step, loss, params, bank, bank_samples});
  }
  out.params = std::move(params);
  return out;
}

double knn_training_accuracy(const EncoderParams& params, const Dataset& dataset, std::size_t k) {
  if (dataset.size() < 2) throw Error(ErrorCode::kEmptyInput, "need at least two samples");
  MemoryBank bank(params.feature_dim(), num_classes_of(dataset));
  std::vector<std::vector<float>> feats;
  for (const auto& s : dataset) {
    feats.push_back(to_float(encoder_forward(params, s.x)));
    bank.insert(feats.back(), s.y, Provenance::source(s.domain));
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    Prediction p = predict_excluding(bank, feats[i], k, {bank.id_at(i)});
    if (p.label == dataset[i].y) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

}  // namespace adanpc
