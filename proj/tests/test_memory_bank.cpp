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
#include <deque>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "adanpc/core_math.hpp"
#include "adanpc/error.hpp"
#include "adanpc/memory_bank.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace adanpc {
namespace {

using testing::random_bank;
using testing::random_feature;

// Full sort of every cosine; ties broken by id, same as the bank.
NeighborSet brute_knn(const MemoryBank& bank, std::span<const float> q, std::size_t k,
                      const ExclusionSet& ex = {}) {
  NeighborSet all;
  for (std::size_t pos = 0; pos < bank.size(); ++pos) {
    if (ex.count(bank.id_at(pos))) continue;
    all.push_back({bank.id_at(pos), cosine_similarity(q, bank.feature_at(pos))});
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.id < b.id;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

TEST(MemoryBank, FifoEviction) {
  MemoryBank bank(2, 2, 2);
  std::vector<float> f{1, 0};
  EntryId e1 = bank.insert(f, 0, Provenance::source(0));
  EntryId e2 = bank.insert(f, 1, Provenance::source(0));
  EntryId e3 = bank.insert(f, 0, Provenance::source(0));
  EXPECT_EQ(bank.size(), 2u);
  EXPECT_FALSE(bank.contains(e1));
  EXPECT_TRUE(bank.contains(e2));
  EXPECT_TRUE(bank.contains(e3));
}

TEST(MemoryBank, UnboundedIdsAreSequential) {
  MemoryBank bank(2, 2);
  std::vector<float> f{0, 1};
  EXPECT_EQ(bank.insert(f, 0, Provenance::source(0)), 0u);
  EXPECT_EQ(bank.insert(f, 0, Provenance::source(0)), 1u);
  EXPECT_EQ(bank.insert(f, 0, Provenance::source(0)), 2u);
  EXPECT_EQ(bank.size(), 3u);
}

TEST(MemoryBank, FifoMatchesQueueOracle) {
  std::mt19937_64 rng(11);
  MemoryBank bank(4, 3, 500);
  std::deque<EntryId> oracle;
  for (int i = 0; i < 501; ++i) {
    EntryId id = bank.insert(random_feature(rng, 4), static_cast<ClassLabel>(i % 3),
                             Provenance::source(0));
    oracle.push_back(id);
    if (oracle.size() > 500) oracle.pop_front();
  }
  ASSERT_EQ(bank.size(), 500u);
  EXPECT_EQ(bank.id_at(0), 1u);
  for (std::size_t pos = 0; pos < bank.size(); ++pos) EXPECT_EQ(bank.id_at(pos), oracle[pos]);
}

TEST(MemoryBank, InsertValidates) {
  MemoryBank bank(2, 2);
  std::vector<float> bad_dim{1, 0, 0}, zero{0, 0}, ok{1, 0};
  auto code_of = [&](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kBadParams;
  };
  EXPECT_EQ(code_of([&] { bank.insert(bad_dim, 0, Provenance::source(0)); }),
            ErrorCode::kDimMismatch);
  EXPECT_EQ(code_of([&] { bank.insert(zero, 0, Provenance::source(0)); }), ErrorCode::kZeroNorm);
  EXPECT_EQ(code_of([&] { bank.insert(ok, 2, Provenance::source(0)); }),
            ErrorCode::kLabelOutOfRange);
  EXPECT_EQ(bank.size(), 0u);
}

TEST(MemoryBank, StoredFeaturesAreUnitNorm) {
  std::mt19937_64 rng(2);
  MemoryBank bank = random_bank(rng, 30, 5, 2);
  for (std::size_t pos = 0; pos < bank.size(); ++pos) {
    EXPECT_NEAR(l2_norm(bank.feature_at(pos)), 1.0, 1e-6);
  }
}

TEST(KnnExact, Examples) {
  MemoryBank bank(2, 2);
  std::vector<float> a{1, 0}, b{0, 1}, q{1, 0.1f};
  EntryId ia = bank.insert(a, 0, Provenance::source(0));
  EntryId ib = bank.insert(b, 1, Provenance::source(0));
  auto top1 = bank.knn_exact(q, 1);
  ASSERT_EQ(top1.size(), 1u);
  EXPECT_EQ(top1[0].id, ia);

  auto all = bank.knn_exact(q, 5);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].id, ia);
  EXPECT_EQ(all[1].id, ib);
  EXPECT_GT(all[0].similarity, all[1].similarity);

  auto ex = bank.knn_exact(q, 1, {ia});
  EXPECT_EQ(ex[0].id, ib);
}

TEST(KnnExact, MatchesBruteForce) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    std::size_t n = 1 + rng() % 120;
    MemoryBank bank = random_bank(rng, n, 1 + rng() % 9, 4);
    auto q = random_feature(rng, bank.dim());
    std::size_t k = 1 + rng() % 15;
    ExclusionSet ex;
    if (n > 1 && t % 2) ex.insert(bank.id_at(rng() % n));
    EXPECT_EQ(bank.knn_exact(q, k, ex), brute_knn(bank, q, k, ex));
  }
}

TEST(KnnExact, Errors) {
  MemoryBank empty(2, 2);
  std::vector<float> q{1, 0};
  try {
    empty.knn_exact(q, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyBank);
  }
  MemoryBank bank(2, 2);
  bank.insert(q, 0, Provenance::source(0));
  EXPECT_THROW(bank.knn_exact(q, 0), Error);
  std::vector<float> zero{0, 0};
  EXPECT_THROW(bank.knn_exact(zero, 1), Error);
}

TEST(Ivf, FullProbeEqualsExact) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    MemoryBank bank = random_bank(rng, 200 + rng() % 300, 8, 3);
    std::size_t nc = 4 + rng() % 12;
    bank.build_ivf({nc, static_cast<std::uint64_t>(t), 10, 0});
    for (int qi = 0; qi < 10; ++qi) {
      auto q = random_feature(rng, 8);
      EXPECT_EQ(bank.knn_ivf(q, 10, nc), bank.knn_exact(q, 10));
    }
  }
}

TEST(Ivf, RecallOnTenThousandVectors) {
  EXPECT_GE(oracle::ivf_recall_10k(8), 0.9);
}

TEST(Ivf, TailInsertIsReachable) {
  std::mt19937_64 rng(4);
  MemoryBank bank = random_bank(rng, 100, 6, 2);
  bank.build_ivf({8, 0, 10, 0});
  EXPECT_EQ(bank.ivf_tail_size(), 0u);
  auto f = random_feature(rng, 6);
  EntryId id = bank.insert(f, 1, Provenance::target(0.9f));
  EXPECT_EQ(bank.ivf_tail_size(), 1u);
  auto res = bank.knn_ivf(f, 1, 1);
  EXPECT_EQ(res[0].id, id);
}

TEST(Ivf, MissingIndexThrows) {
  std::mt19937_64 rng(4);
  MemoryBank bank = random_bank(rng, 10, 3, 2);
  try {
    bank.knn_ivf(random_feature(rng, 3), 1, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIndexMissing);
  }
  EXPECT_THROW(bank.build_ivf({11, 0, 5, 0}), Error);
}

}  // namespace
}  // namespace adanpc
