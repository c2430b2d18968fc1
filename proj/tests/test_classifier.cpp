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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "adanpc/classifier.hpp"
#include "adanpc/core_math.hpp"
#include "adanpc/error.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace adanpc {
namespace {

using testing::random_bank;
using testing::random_feature;
using oracle::brute_predict;
using oracle::BruteVote;

std::vector<EntryId> ids_of(const NeighborSet& n) {
  std::vector<EntryId> out;
  for (const auto& x : n) out.push_back(x.id);
  return out;
}

TEST(Predict, SingleEntryExample) {
  MemoryBank bank(2, 3);
  std::vector<float> e{1, 0};
  bank.insert(e, 1, Provenance::source(0));
  // cos(q, e) = 0.8
  std::vector<float> q{0.8f, 0.6f};
  Prediction p = predict(bank, q, 1);
  const double c = cosine_similarity(std::span<const float>(q), std::span<const float>(e));
  EXPECT_NEAR(c, 0.8, 1e-7);
  EXPECT_EQ(p.class_scores[0], 0.0);
  EXPECT_EQ(p.class_scores[1], c);
  EXPECT_EQ(p.class_scores[2], 0.0);
  const double z = 2.0 + std::exp(c);
  EXPECT_NEAR(p.probs[0], 1.0 / z, 1e-15);
  EXPECT_NEAR(p.probs[1], std::exp(c) / z, 1e-15);
  // directly evaluated softmax(0, 0.8, 0)
  EXPECT_NEAR(p.probs[0], 0.236656, 1e-5);
  EXPECT_NEAR(p.probs[1], 0.526688, 1e-5);
  EXPECT_EQ(p.label, 1u);
}

TEST(Predict, UnanimousVote) {
  MemoryBank bank(2, 3);
  std::vector<float> a{1, 0.1f}, b{1, -0.1f}, q{1, 0};
  bank.insert(a, 0, Provenance::source(0));
  bank.insert(b, 0, Provenance::source(0));
  Prediction p = predict(bank, q, 2);
  EXPECT_EQ(p.label, 0u);
  EXPECT_GT(p.confidence, 1.0 / 3.0);
}

TEST(Predict, MatchesBruteForce) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 300; ++t) {
    MemoryBank bank = random_bank(rng, 1 + rng() % 60, 3 + rng() % 6, 2 + rng() % 4);
    auto q = random_feature(rng, bank.dim());
    std::size_t k = 1 + rng() % 12;
    Prediction p = predict(bank, q, k);
    BruteVote b = brute_predict(bank, q, k);
    EXPECT_EQ(p.probs, b.probs);
    EXPECT_EQ(p.label, b.label);
    EXPECT_EQ(ids_of(p.neighbors), b.ids);
  }
}

TEST(Predict, UniformWeighting) {
  MemoryBank bank(2, 2);
  std::vector<float> a{1, 0}, b{1, 0.2f}, c{0, 1}, q{1, 0.05f};
  bank.insert(a, 0, Provenance::source(0));
  bank.insert(b, 0, Provenance::source(0));
  bank.insert(c, 1, Provenance::source(0));
  Prediction p = predict(bank, q, 3, Weighting::kUniform);
  EXPECT_NEAR(p.class_scores[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p.class_scores[1], 1.0 / 3.0, 1e-15);
}

TEST(Predict, ProbabilitiesSumToOne) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 50; ++t) {
    MemoryBank bank = random_bank(rng, 40, 5, 5);
    Prediction p = predict(bank, random_feature(rng, 5), 7);
    double s = 0;
    for (double v : p.probs) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_EQ(p.confidence, p.probs[p.label]);
  }
}

TEST(Predict, EmptyBankThrows) {
  MemoryBank bank(2, 2);
  std::vector<float> q{1, 0};
  try {
    predict(bank, q, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyBank);
  }
}

TEST(DefaultMargin, Values) {
  EXPECT_EQ(default_margin(2), 0.5);
  EXPECT_EQ(default_margin(3), 2.0 / 3.0);
  EXPECT_EQ(default_margin(10), 0.5);
}

TEST(AdaptStep, GatePassesAndBlocks) {
  MemoryBank bank(2, 2);
  std::vector<float> a{1, 0}, b{0, 1};
  for (int i = 0; i < 5; ++i) bank.insert(a, 0, Provenance::source(0));
  bank.insert(b, 1, Provenance::source(0));
  AdaptConfig cfg;
  cfg.k = 5;
  cfg.margin = 0.5;

  std::vector<float> q{1, 0.01f};
  AdaptResult r = adapt_step(bank, q, cfg, 3);
  EXPECT_GT(r.prediction.confidence, 0.95);
  EXPECT_TRUE(r.inserted);
  ASSERT_TRUE(r.entry_id);
  EXPECT_EQ(bank.size(), 7u);
  auto e = bank.entry(*r.entry_id);
  EXPECT_EQ(e.label, 0u);
  EXPECT_EQ(e.provenance.kind, ProvenanceKind::kTarget);
  EXPECT_EQ(e.provenance.domain_id, 3u);

  // five class-0 neighbors: softmax(5, 0) = 0.9933
  cfg.margin = 0.999;
  AdaptResult blocked = adapt_step(bank, q, cfg);
  EXPECT_LT(blocked.prediction.confidence, 0.999);
  EXPECT_FALSE(blocked.inserted);
  EXPECT_EQ(bank.size(), 7u);
}

TEST(AdaptStep, MarginIsStrict) {
  MemoryBank bank(2, 2);
  std::vector<float> a{1, 0}, b{0, 1}, q{1, 1};
  bank.insert(a, 0, Provenance::source(0));
  bank.insert(b, 1, Provenance::source(0));
  AdaptConfig cfg;
  cfg.k = 2;
  cfg.margin = 0.5;
  AdaptResult r = adapt_step(bank, q, cfg);
  EXPECT_EQ(r.prediction.confidence, 0.5);
  EXPECT_FALSE(r.inserted);
}

TEST(AdaptStep, SourceEntriesNeverRemoved) {
  std::mt19937_64 rng(31);
  MemoryBank bank = random_bank(rng, 50, 4, 3);
  auto before = bank.entries();
  AdaptConfig cfg;
  cfg.margin = 0.4;
  for (int i = 0; i < 200; ++i) adapt_step(bank, random_feature(rng, 4), cfg);
  for (const auto& e : before) {
    ASSERT_TRUE(bank.contains(e.id));
    EXPECT_EQ(bank.entry(e.id), e);
  }
}

TEST(AdaptStep, ReplayOracleCountsConfidentPredictions) {
  // Two Gaussian classes; the target stream is rotated by 30 degrees.
  std::mt19937_64 rng(41);
  std::normal_distribution<double> nd(0.0, 0.3);
  auto draw = [&](int cls, double angle) {
    double cx = cls ? -1.0 : 1.0;
    double x = cx + nd(rng), y = nd(rng);
    double c = std::cos(angle), s = std::sin(angle);
    return std::vector<float>{static_cast<float>(c * x - s * y), static_cast<float>(s * x + c * y)};
  };
  MemoryBank bank(2, 2);
  for (int i = 0; i < 100; ++i) bank.insert(draw(i % 2, 0.0), i % 2, Provenance::source(0));
  MemoryBank replay = bank;
  std::vector<std::vector<float>> stream;
  for (int i = 0; i < 100; ++i) stream.push_back(draw(i % 2, 0.5236));

  AdaptConfig cfg;
  cfg.k = 7;
  cfg.margin = 0.6;
  const std::size_t initial = bank.size();
  for (const auto& q : stream) adapt_step(bank, q, cfg);

  std::size_t confident = 0;
  for (const auto& q : stream) {
    BruteVote v = brute_predict(replay, q, cfg.k);
    if (v.probs[v.label] > cfg.margin) {
      replay.insert(q, v.label, Provenance::target(static_cast<float>(v.probs[v.label])));
      ++confident;
    }
  }
  EXPECT_EQ(bank.size(), initial + confident);
  EXPECT_EQ(bank.entries(), replay.entries());
}

TEST(AdaptStep, FifoBankRejectsAugmentation) {
  MemoryBank bank(2, 2, 10);
  std::vector<float> a{1, 0};
  bank.insert(a, 0, Provenance::source(0));
  EXPECT_THROW(adapt_step(bank, a, AdaptConfig{}), Error);
  AdaptConfig off;
  off.augment_enabled = false;
  EXPECT_NO_THROW(adapt_step(bank, a, off));
}

TEST(PredictExcluding, EmptySetIsPredict) {
  std::mt19937_64 rng(43);
  MemoryBank bank = random_bank(rng, 30, 4, 3);
  auto q = random_feature(rng, 4);
  Prediction a = predict(bank, q, 5);
  Prediction b = predict_excluding(bank, q, 5, {});
  EXPECT_EQ(a.probs, b.probs);
  EXPECT_EQ(a.neighbors, b.neighbors);
}

TEST(PredictExcluding, RemovingWrongClassRaisesConfidence) {
  MemoryBank bank(2, 2);
  std::vector<float> q{1, 0};
  for (float y : {0.05f, 0.1f, 0.15f}) {
    std::vector<float> f{1, y};
    bank.insert(f, 0, Provenance::source(0));
  }
  ExclusionSet wrong;
  for (float y : {0.02f, 0.12f}) {
    std::vector<float> f{1, -y};
    wrong.insert(bank.insert(f, 1, Provenance::source(0)));
  }
  Prediction before = predict(bank, q, 5);
  Prediction after = predict_excluding(bank, q, 5, wrong);
  EXPECT_EQ(after.label, 0u);
  EXPECT_GT(after.probs[0], before.probs[0]);
  BruteVote b = brute_predict(bank, q, 5, wrong);
  EXPECT_EQ(after.probs, b.probs);
}

TEST(PredictExcluding, DropTopNeighbor) {
  std::mt19937_64 rng(47);
  for (int t = 0; t < 50; ++t) {
    MemoryBank bank = random_bank(rng, 25, 3, 3);
    auto q = random_feature(rng, 3);
    Prediction p = predict(bank, q, 6);
    ExclusionSet ex{p.neighbors[0].id};
    Prediction r = predict_excluding(bank, q, 6, ex);
    EXPECT_EQ(ids_of(r.neighbors), brute_predict(bank, q, 6, ex).ids);
  }
}

}  // namespace
}  // namespace adanpc
