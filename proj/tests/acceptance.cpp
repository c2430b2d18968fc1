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

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "adanpc/classifier.hpp"
#include "adanpc/encoder.hpp"
#include "adanpc/error.hpp"
#include "adanpc/harness.hpp"
#include "adanpc/snapshot.hpp"
#include "adanpc/stats.hpp"
#include "adanpc/theory_lab.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using namespace adanpc;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::uint64_t> seed_range(std::uint64_t n) {
  std::vector<std::uint64_t> s(n);
  std::iota(s.begin(), s.end(), 1);
  return s;
}

std::vector<double> column(const theory::CellResult& cell, std::size_t metric) {
  std::vector<double> out;
  for (const auto& row : cell.per_seed) out.push_back(row[metric]);
  return out;
}

std::size_t metric_index(const theory::ExperimentReport& r, const std::string& name) {
  for (std::size_t i = 0; i < r.metric_names.size(); ++i) {
    if (r.metric_names[i] == name) return i;
  }
  throw std::runtime_error("no metric " + name);
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Outcome gradients() {
  auto t0 = Clock::now();
  double knn = 0, bn = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    knn = std::max(knn, oracle::knn_grad_fd_error(seed));
    bn = std::max(bn, oracle::bn_grad_fd_error(seed));
  }
  double secs = seconds_since(t0);
  return {knn < 1e-4 && bn < 1e-4 && secs < 30.0,
          "knn max rel " + num(knn) + ", bn max rel " + num(bn) + ", " + num(secs) + " s"};
}

Outcome predict_oracle() {
  std::mt19937_64 rng(42);
  std::size_t mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    MemoryBank bank = testing::random_bank(rng, 1 + rng() % 200, 2 + rng() % 15, 2 + rng() % 6);
    auto q = testing::random_feature(rng, bank.dim());
    std::size_t k = 1 + rng() % 20;
    Prediction p = predict(bank, q, k);
    oracle::BruteVote b = oracle::brute_predict(bank, q, k);
    std::vector<EntryId> ids;
    for (const auto& n : p.neighbors) ids.push_back(n.id);
    if (p.probs != b.probs || p.label != b.label || ids != b.ids) ++mismatches;
  }
  return {mismatches == 0, num(static_cast<double>(mismatches)) + " mismatches in 1000 instances"};
}

Outcome ivf() {
  std::mt19937_64 rng(9);
  std::size_t mismatches = 0, total = 0;
  for (int t = 0; t < 50; ++t) {
    std::size_t dim = 4 + rng() % 29;
    MemoryBank bank = testing::random_bank(rng, 50 + rng() % 500, dim, 3);
    std::size_t nc = 2 + rng() % 20;
    bank.build_ivf({nc, static_cast<std::uint64_t>(t), 10, 0});
    for (int qi = 0; qi < 10; ++qi) {
      auto q = testing::random_feature(rng, dim);
      std::size_t k = 1 + rng() % 20;
      mismatches += !(bank.knn_ivf(q, k, nc) == bank.knn_exact(q, k));
      ++total;
    }
  }
  double recall = oracle::ivf_recall_10k(64 / 8);
  return {mismatches == 0 && recall >= 0.9,
          "full-probe mismatches " + num(static_cast<double>(mismatches)) + "/" +
              num(static_cast<double>(total)) + ", recall@10 " + num(recall)};
}

Outcome prop2() {
  auto t0 = Clock::now();
  json grid = {{"n_s", {100, 10000}}, {"shift_kind", "covariate"}};
  auto r = theory::run_prop2(grid, seed_range(30));
  const std::size_t m = metric_index(r, "excess_error");
  auto small = column(r.cells[0], m), large = column(r.cells[1], m);
  auto t = stats::paired_t_test_less(large, small);
  double secs = seconds_since(t0);
  return {t.p_value < 0.05 && secs < 300.0,
          "excess n_s=100 " + num(mean(small)) + ", n_s=10000 " + num(mean(large)) + ", p " +
              num(t.p_value) + ", " + num(secs) + " s"};
}

Outcome prop3() {
  json grid = {{"shift_kind", "posterior"}, {"C_ada", 0.3}, {"c_mu", 0.3}, {"c_mu_star", 1.0}};
  auto r = theory::run_prop3(grid, seed_range(30));
  auto src = column(r.cells[0], metric_index(r, "excess_source_only"));
  auto mix = column(r.cells[0], metric_index(r, "excess_mixed"));
  auto t = stats::paired_t_test_less(mix, src);
  return {mean(mix) <= mean(src) && t.p_value < 0.05,
          "source-only " + num(mean(src)) + ", mixed " + num(mean(mix)) + ", p " + num(t.p_value)};
}

// Minimum over all n! matchings.
double brute_w1(const theory::PointCloud& P, const theory::PointCloud& Q) {
  std::vector<int> perm(static_cast<std::size_t>(P.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double t = 0;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      t += (P.row(static_cast<Eigen::Index>(i)) - Q.row(perm[i])).norm();
    }
    best = std::min(best, t / static_cast<double>(perm.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Outcome prop1() {
  json grid = {{"c_mu", {0.5, 0.75, 1.0}}, {"k", {1, 3, 5}}};
  auto r = theory::run_prop1(grid, seed_range(50));
  const std::size_t m = metric_index(r, "omega_better");
  double worst = 1.0;
  for (const auto& cell : r.cells) worst = std::min(worst, mean(column(cell, m)));

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 1);
  std::size_t w1_bad = 0;
  for (int t = 0; t < 80; ++t) {
    auto n = static_cast<Eigen::Index>(1 + t % 8);
    int d = 2 + t % 3;
    theory::PointCloud x(n, d), y(n, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x.data()[i] = u(rng);
      y.data()[i] = u(rng);
    }
    w1_bad += theory::wasserstein1_exact(x, y) != brute_w1(x, y);
  }
  return {worst >= 0.9 && w1_bad == 0,
          "worst cell omega_better " + num(worst) + " over " + num(static_cast<double>(r.cells.size())) +
              " cells, W1 brute-force mismatches " + num(static_cast<double>(w1_bad))};
}

harness::RotatedSequenceSpec rotated(std::uint64_t seed) {
  harness::RotatedSequenceSpec s;
  s.n_domains = 6;
  s.angle_step_deg = 15.0;
  s.seed = seed;
  return s;
}

Outcome successive() {
  harness::BaselineSpec ada, frozen;
  frozen.kind = harness::BaselineKind::kFrozenLinear;
  std::vector<double> a, f;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto seq = harness::make_rotated_sequence(rotated(seed));
    a.push_back(harness::run_successive(seq, ada, identity_encoder(2), seed).rows.back().during_accuracy);
    f.push_back(harness::run_successive(seq, frozen, identity_encoder(2), seed).rows.back().during_accuracy);
  }
  return {mean(a) >= mean(f) + 0.10,
          "adanpc d5 " + num(mean(a)) + ", frozen_linear d5 " + num(mean(f))};
}

Outcome forgetting() {
  harness::BaselineSpec ada, ent;
  ent.kind = harness::BaselineKind::kEntropyHead;
  bool counts_ok = true;
  std::vector<double> ada_change, ent_drop, ada_drop;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto seq = harness::make_rotated_sequence(rotated(seed));
    auto ra = harness::run_successive(seq, ada, identity_encoder(2), seed);
    auto re = harness::run_successive(seq, ent, identity_encoder(2), seed);
    counts_ok = counts_ok && ra.source_entries_after == ra.source_entries_before &&
                ra.source_entries_before == seq.domains[0].size() && ra.source_entries_unchanged;
    ada_change.push_back(std::abs(ra.rows.back().source_accuracy - ra.rows.front().source_accuracy));
    ada_drop.push_back(ra.rows.front().source_accuracy - ra.rows.back().source_accuracy);
    ent_drop.push_back(re.rows.front().source_accuracy - re.rows.back().source_accuracy);
  }
  double worst_change = *std::max_element(ada_change.begin(), ada_change.end());
  return {counts_ok && mean(ada_change) <= 0.02 && mean(ent_drop) > mean(ada_drop),
          std::string("source entries ") + (counts_ok ? "intact" : "CHANGED") + ", adanpc mean |d0 change| " +
              num(mean(ada_change)) + " (max " + num(worst_change) + "), entropy_head mean d0 drop " +
              num(mean(ent_drop)) + " vs adanpc " + num(mean(ada_drop))};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int sh(const std::string& cmd) {
  return std::system((cmd + " > /dev/null 2>&1").c_str());
}

Outcome determinism() {
  const std::string cli = ADANPC_CLI_PATH;
  fs::path dir = fs::temp_directory_path() / ("adanpc_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto p = [&](const std::string& n) { return (dir / n).string(); };
  std::ofstream(p("seq.json")) << R"({"n_domains":3,"n_per_domain":80,"n_classes":3})";
  std::ofstream(p("train.json"))
      << R"({"seed":3,"data":{"kind":"rotated","n_domains":2,"n_per_domain":150,"n_classes":3,"sigma":0.3},)"
      << R"("loss":{"k":5,"bank_capacity":120,"refresh_period":20,"iterations":150}})";
  std::ofstream(p("grid.json")) << R"({"n_s":[100,400],"n_test":500})";

  std::vector<std::string> failed;
  for (int rep = 0; rep < 2; ++rep) {
    const std::string s = std::to_string(rep);
    int rc = 0;
    rc |= sh(cli + " train --config " + p("train.json") + " --out " + p("enc" + s + ".json") +
             " --trace " + p("train" + s + ".csv"));
    rc |= sh(cli + " pack --sequence " + p("seq.json") + " --domain 0 --seed 5 --encoder " +
             p("enc0.json") + " --out " + p("bank" + s + ".pack"));
    rc |= sh(cli + " pack --sequence " + p("seq.json") + " --domain 2 --seed 5 --encoder " +
             p("enc0.json") + " --out " + p("stream" + s + ".pack"));
    rc |= sh(cli + " adapt --bank " + p("bank" + s + ".pack") + " --stream " + p("stream" + s + ".pack") +
             " --k 5 --report " + p("adapt" + s + ".csv"));
    rc |= sh(cli + " theory prop2 --grid " + p("grid.json") + " --seeds 1-3 --report " + p("theory" + s + ".csv"));
    rc |= sh(cli + " successive --sequence " + p("seq.json") + " --method adanpc_bn --seeds 1,2 --report " +
             p("succ" + s + ".csv"));
    if (rc != 0) failed.push_back("nonzero exit in run " + s);
  }
  for (const char* name : {"train", "adapt", "theory", "succ"}) {
    std::string a = slurp(p(std::string(name) + "0.csv")), b = slurp(p(std::string(name) + "1.csv"));
    if (a.empty() || a != b) failed.push_back(std::string(name) + " differs");
  }
  fs::remove_all(dir);
  std::string detail = "train, adapt, theory, successive CSVs byte-identical";
  if (!failed.empty()) {
    detail.clear();
    for (const auto& f : failed) detail += f + "; ";
  }
  return {failed.empty(), detail};
}

Outcome persistence() {
  std::mt19937_64 rng(77);
  fs::path path = fs::temp_directory_path() / ("adanpc_accept_snap_" + std::to_string(::getpid()));
  std::size_t bad_roundtrip = 0, accepted_corrupt = 0, atomic_bad = 0;
  for (int t = 0; t < 10; ++t) {
    MemoryBank bank(5 + t, 3, t % 2 ? std::nullopt : std::optional<std::size_t>(30));
    for (int i = 0; i < 40 + t; ++i) {
      auto f = testing::random_feature(rng, bank.dim());
      Provenance pv = i % 3 ? Provenance::source(i % 4) : Provenance::target(0.5f + 0.01f * i, 1);
      bank.insert(f, static_cast<ClassLabel>(i % 3), pv);
    }
    snapshot_save(bank, path);
    MemoryBank back = snapshot_load(path);
    bad_roundtrip += !(back.entries() == bank.entries() && encode_snapshot(back) == encode_snapshot(bank) &&
                       back.capacity() == bank.capacity());

    auto bytes = encode_snapshot(bank);
    for (std::size_t i = 0; i < bytes.size(); i += 1 + bytes.size() / 64) {
      auto copy = bytes;
      copy[i] ^= 0x21;
      try {
        decode_snapshot(copy);
        ++accepted_corrupt;
      } catch (const Error&) {
      }
    }
    std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(bytes.size() / 2));
    try {
      decode_snapshot(part);
      ++accepted_corrupt;
    } catch (const Error&) {
    }

    // A failed load must leave the caller's bank as it was.
    MemoryBank held = back;
    std::ofstream(path, std::ios::binary | std::ios::trunc)
        .write(reinterpret_cast<const char*>(part.data()), static_cast<std::streamsize>(part.size()));
    try {
      held = snapshot_load(path);
      ++accepted_corrupt;
    } catch (const Error&) {
    }
    atomic_bad += !(held.entries() == bank.entries());
  }
  fs::remove(path);
  fs::remove(manifest_path(path));
  return {bad_roundtrip == 0 && accepted_corrupt == 0 && atomic_bad == 0,
          "round-trip mismatches " + num(static_cast<double>(bad_roundtrip)) + ", corrupt accepted " +
              num(static_cast<double>(accepted_corrupt)) + ", non-atomic " + num(static_cast<double>(atomic_bad))};
}

Outcome performance() {
  harness::BenchConfig cfg;
  cfg.sizes = {100000};
  cfg.dim = 128;
  cfg.k = 10;
  auto rows = harness::bench_inference(cfg);
  double exact = -1, ivf_p50 = -1, recall = 0;
  std::size_t nc = 0, nprobe = 0;
  bool gate = true;
  for (const auto& r : rows) {
    gate = gate && r.gate_ok;
    if (r.variant == "exact") exact = r.p50_us;
    if (r.variant == "ivf") {
      ivf_p50 = r.p50_us;
      recall = r.recall;
      nc = r.n_clusters;
      nprobe = r.nprobe;
    }
  }
  return {gate && exact >= 0 && exact < 50000 && ivf_p50 >= 0 && ivf_p50 < 5000 && recall >= 0.85 &&
              nprobe == std::max<std::size_t>(1, nc / 16),
          "exact p50 " + num(exact / 1000) + " ms, ivf p50 " + num(ivf_p50 / 1000) + " ms at nprobe " +
              num(static_cast<double>(nprobe)) + "/" + num(static_cast<double>(nc)) + ", recall@10 " + num(recall)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradients},
      {"predict oracle equivalence", predict_oracle},
      {"ivf correctness", ivf},
      {"covariate shift excess error falls with n_s", prop2},
      {"mixed bank beats source-only under posterior shift", prop3},
      {"omega restriction shrinks W1", prop1},
      {"successive adaptation beats frozen linear", successive},
      {"forgetting immunity", forgetting},
      {"determinism", determinism},
      {"persistence", persistence},
      {"performance gate", performance},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s criterion %zu (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
