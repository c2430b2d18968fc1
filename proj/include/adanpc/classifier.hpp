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

// Non-parametric prediction over a memory bank and the confidence-gated
// online adaptation step.
//
// Class scores sum the neighbor weights per label: cosine similarity by
// default (negative similarities are kept as-is), or a flat 1/k. The
// returned probabilities are the softmax of those scores.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "adanpc/memory_bank.hpp"

namespace adanpc {

enum class Weighting { kCosine, kUniform };

struct Prediction {
  std::vector<double> probs;
  ClassLabel label = 0;
  double confidence = 0.0;
  NeighborSet neighbors;
  std::vector<double> class_scores;
};

/// Neighbor votes -> Prediction. Exposed so baselines and oracles share it.
Prediction prediction_from_neighbors(const MemoryBank& bank, NeighborSet neighbors,
                                     Weighting weighting = Weighting::kCosine);

/// Default k for inference.
inline constexpr std::size_t kDefaultK = 10;

/// Default confidence gate: 0.5 for two classes, max(0.5, 2/C) above that.
double default_margin(std::uint32_t num_classes);

struct AdaptConfig {
  std::size_t k = kDefaultK;
  double margin = 0.5;  // strict gate: insert iff confidence > margin
  bool augment_enabled = true;
  Weighting weighting = Weighting::kCosine;

  /// Throws BadParams unless k >= 1 and margin in (0, 1).
  void validate() const;
};

Prediction predict(const MemoryBank& bank, std::span<const float> query, std::size_t k,
                   Weighting weighting = Weighting::kCosine);

/// Like predict, but the search skips `excluded` and refills to k from the
/// remaining entries. Throws EmptyBank if everything is excluded.
Prediction predict_excluding(const MemoryBank& bank, std::span<const float> query,
                             std::size_t k, const ExclusionSet& excluded,
                             Weighting weighting = Weighting::kCosine);

struct AdaptResult {
  Prediction prediction;
  bool inserted = false;
  std::optional<EntryId> entry_id;
};

/// Predicts, then inserts (query, label, Target(confidence)) when
/// augmentation is on and confidence > margin. The prediction is made
/// before the insert, so a sample never votes for itself.
AdaptResult adapt_step(MemoryBank& bank, std::span<const float> query, const AdaptConfig& config,
                       std::uint32_t domain_id = 0);

}  // namespace adanpc
