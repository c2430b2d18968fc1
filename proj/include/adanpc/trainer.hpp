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

// Representation learning with the neighborhood-contrastive KNN loss.
//
// For a sample i with k neighbors B_i drawn from the training bank:
//
//   loss_i = -log( (sum_{j in B_i, y_j = y_i} exp(w_ij / tau) + eps)
//                / (sum_{j in B_i}              exp(w_ij / tau) + eps) )
//
// where w_ij is the cosine similarity between the sample's encoding and
// the stored feature of j. Neighbor sets and stored features are constants
// for the gradient; only the sample's own encoding carries gradient.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "adanpc/encoder.hpp"
#include "adanpc/memory_bank.hpp"

namespace adanpc {

struct Sample {
  Eigen::VectorXd x;
  ClassLabel y = 0;
  std::uint32_t domain = 0;
};
using Dataset = std::vector<Sample>;

struct KnnLossConfig {
  std::size_t k = 10;
  double tau = 0.1;
  std::size_t bank_capacity = 1000;
  std::size_t refresh_period = 100;
  double epsilon_log = 1e-12;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t batch_size = 32;
  std::size_t iterations = 500;

  /// Throws BadParams on out-of-range fields.
  void validate() const;
};

void to_json(nlohmann::json& j, const KnnLossConfig& c);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, KnnLossConfig& c);

/// Frozen neighbor sets for one batch. Row r of `features` is the stored
/// (unit-norm) feature of neighbor r.
struct SampleNeighbors {
  std::vector<EntryId> ids;
  Eigen::MatrixXd features;
  std::vector<std::uint8_t> positive;
};
using NeighborPlan = std::vector<SampleNeighbors>;

/// Encodes each sample and searches its k neighbors in `bank`, skipping
/// any entry whose stored feature is bit-identical to the sample's own
/// normalized encoding. Throws EmptyBank.
NeighborPlan plan_neighbors(const EncoderParams& params, std::span<const Sample> batch,
                            const MemoryBank& bank, const KnnLossConfig& config);

/// Loss of one sample from its neighbor similarities.
double knn_sample_loss(std::span<const double> sims, std::span<const std::uint8_t> positive,
                       double tau, double epsilon);
/// d loss / d sims for one sample.
std::vector<double> knn_sample_loss_grad(std::span<const double> sims,
                                         std::span<const std::uint8_t> positive, double tau,
                                         double epsilon);

struct LossResult {
  double loss = 0.0;  // mean over the batch
  std::vector<double> per_sample;
};

LossResult knn_loss_planned(const EncoderParams& params, std::span<const Sample> batch,
                            const NeighborPlan& plan, const KnnLossConfig& config);
LayerTensors knn_loss_grad_planned(const EncoderParams& params, std::span<const Sample> batch,
                                   const NeighborPlan& plan, const KnnLossConfig& config);

LossResult knn_loss(const EncoderParams& params, std::span<const Sample> batch,
                    const MemoryBank& bank, const KnnLossConfig& config);
LayerTensors knn_loss_grad(const EncoderParams& params, std::span<const Sample> batch,
                           const MemoryBank& bank, const KnnLossConfig& config);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  LayerTensors m;
  LayerTensors v;
  std::int64_t step = 0;

  static AdamState zeros_like(const EncoderParams& params);
};

/// Bias-corrected Adam on flat buffers. `step` is the 1-based step number.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::int64_t step, const AdamConfig& config);

/// One Adam step over every dense layer. Throws ShapeMismatch.
void adam_step(EncoderParams& params, const LayerTensors& grads, AdamState& state,
               const AdamConfig& config);

struct TrainStepView {
  std::size_t step = 0;  // 1-based
  double loss = 0.0;
  const EncoderParams& params;
  const MemoryBank& bank;
  // Dataset index behind each bank position.
  std::span<const std::size_t> bank_samples;
};

struct TrainResult {
  EncoderParams params;
  std::vector<double> loss_trace;
};

/// Online training loop: sample a batch, compute the loss against the
/// current FIFO bank, push the batch encodings, take an Adam step, and
/// every refresh_period steps re-encode the bank with the new weights.
TrainResult train(EncoderParams params, const Dataset& dataset, const KnnLossConfig& config,
                  std::uint64_t seed,
                  const std::function<void(const TrainStepView&)>& on_step = {});

/// Leave-one-out KNN accuracy of the encoder over `dataset`.
double knn_training_accuracy(const EncoderParams& params, const Dataset& dataset, std::size_t k);

std::uint32_t num_classes_of(const Dataset& dataset);

}  // namespace adanpc
