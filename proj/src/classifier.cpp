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

#include "adanpc/classifier.hpp"

#include <algorithm>

#include "adanpc/core_math.hpp"
#include "adanpc/error.hpp"

namespace adanpc {

double default_margin(std::uint32_t num_classes) {
  if (num_classes <= 2) return 0.5;
  return std::max(0.5, 2.0 / static_cast<double>(num_classes));
}

void AdaptConfig::validate() const {
  if (k == 0) throw Error(ErrorCode::kBadParams, "k must be >= 1");
  if (!(margin > 0.0 && margin < 1.0)) throw Error(ErrorCode::kBadParams, "margin must be in (0,1)");
}

Prediction prediction_from_neighbors(const MemoryBank& bank, NeighborSet neighbors,
                                     Weighting weighting) {
  Prediction p;
  p.class_scores.assign(bank.num_classes(), 0.0);
  const double flat = neighbors.empty() ? 0.0 : 1.0 / static_cast<double>(neighbors.size());
  for (const Neighbor& n : neighbors) {
    auto pos = bank.position(n.id);
    if (!pos) throw Error(ErrorCode::kUnknownEntry, "neighbor " + std::to_string(n.id));
    p.class_scores[bank.label_at(*pos)] += weighting == Weighting::kCosine ? n.similarity : flat;
  }
  p.probs = softmax(p.class_scores);
  p.label = static_cast<ClassLabel>(argmax(p.probs));
  p.confidence = p.probs[p.label];
  p.neighbors = std::move(neighbors);
  return p;
}

Prediction predict(const MemoryBank& bank, std::span<const float> query, std::size_t k,
                   Weighting weighting) {
  return predict_excluding(bank, query, k, {}, weighting);
}

Prediction predict_excluding(const MemoryBank& bank, std::span<const float> query,
                             std::size_t k, const ExclusionSet& excluded, Weighting weighting) {
  if (bank.empty()) throw Error(ErrorCode::kEmptyBank, "cannot predict from an empty bank");
  return prediction_from_neighbors(bank, bank.knn_exact(query, k, excluded), weighting);
}

AdaptResult adapt_step(MemoryBank& bank, std::span<const float> query, const AdaptConfig& config,
                       std::uint32_t domain_id) {
  config.validate();
  if (config.augment_enabled && bank.capacity()) {
    throw Error(ErrorCode::kBadParams, "augmentation needs an unbounded (inference) bank");
  }
  AdaptResult out;
  out.prediction = predict(bank, query, config.k, config.weighting);
  if (config.augment_enabled && out.prediction.confidence > config.margin) {
    out.entry_id = bank.insert(query, out.prediction.label,
                               Provenance::target(static_cast<float>(out.prediction.confidence),
                                                  domain_id));
    out.inserted = true;
  }
  return out;
}

}  // namespace adanpc
