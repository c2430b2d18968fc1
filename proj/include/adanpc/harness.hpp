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

// Successive-adaptation protocol, baseline test-time methods, the rotated
// blob benchmark and inference-time measurements.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "adanpc/bn_layer.hpp"
#include "adanpc/classifier.hpp"
#include "adanpc/encoder.hpp"
#include "adanpc/memory_bank.hpp"
#include "adanpc/trainer.hpp"

namespace adanpc::harness {

// ---- rotated blobs -----------------------------------------------------

struct RotatedSequenceSpec {
  std::size_t n_domains = 6;
  double angle_step_deg = 15.0;
  std::size_t n_per_domain = 300;
  std::size_t n_classes = 3;
  std::size_t n_source_test = 300;  // held-out d0 split
  double radius = 1.0;
  double sigma = 0.1;
  std::size_t lift_dim = 0;  // 0 or 2 keeps the data 2-D
  std::uint64_t seed = 0;

  /// Throws BadParams.
  void validate() const;
  std::size_t dim() const { return lift_dim > 2 ? lift_dim : 2; }
};

void to_json(nlohmann::json& j, const RotatedSequenceSpec& s);
void from_json(const nlohmann::json& j, RotatedSequenceSpec& s);

struct DomainSequence {
  RotatedSequenceSpec spec;
  std::vector<Dataset> domains;  // domains[0] is the source training split
  Dataset source_test;
  Eigen::MatrixXd lift;  // dim x 2 with orthonormal columns
};

/// Class c of domain i is a Gaussian blob (sd sigma) centred at angle
/// 2 pi c / C + i * step on the circle of the given radius.
DomainSequence make_rotated_sequence(const RotatedSequenceSpec& spec);

/// Generator mean of class c in domain i, after the lift.
Eigen::VectorXd class_center(const DomainSequence& seq, std::size_t c, std::size_t domain);

Eigen::Matrix2d rotation(double degrees);

// ---- baselines ---------------------------------------------------------

enum class BaselineKind { kFrozenLinear, kPrototype, kEntropyHead, kAdaNpc, kAdaNpcBn };

std::optional<BaselineKind> parse_baseline(const std::string& name);
std::string baseline_name(BaselineKind kind);

struct BaselineSpec {
  BaselineKind kind = BaselineKind::kAdaNpc;
  std::size_t k = kDefaultK;
  std::optional<double> margin;  // default_margin(C) when unset
  double prototype_tau = 0.1;
  double entropy_lr = 0.1;
  std::size_t head_epochs = 300;
  double head_lr = 0.5;
  double bn_lr = 0.1;
  double bn_momentum = 0.1;
};

/// Reads hyperparameters from `j`; the kind comes from `name`.
BaselineSpec baseline_from_json(const std::string& name, const nlohmann::json& j);

/// Linear softmax head over features: scores = W^T h + b.
struct LinearHead {
  Eigen::MatrixXd weight;  // dim x C
  Eigen::VectorXd bias;

  std::vector<double> probs(const Eigen::VectorXd& h) const;
};

/// Full-batch gradient descent on mean cross-entropy from a zero start.
LinearHead train_linear_head(const std::vector<Eigen::VectorXd>& features,
                             const std::vector<ClassLabel>& labels, std::size_t num_classes,
                             std::size_t epochs, double lr);

/// Mean prediction entropy of the head over a batch and its gradient.
double head_entropy(const LinearHead& head, const std::vector<Eigen::VectorXd>& batch);
LinearHead head_entropy_grad(const LinearHead& head, const std::vector<Eigen::VectorXd>& batch);

/// A test-time method. predict_adapt may change state; predict never does.
class Adapter {
 public:
  virtual ~Adapter() = default;
  virtual Prediction predict_adapt(const Eigen::VectorXd& h, std::uint32_t domain_id) = 0;
  virtual Prediction predict(const Eigen::VectorXd& h) const = 0;
};

class FrozenLinear : public Adapter {
 public:
  explicit FrozenLinear(LinearHead head) : head_(std::move(head)) {}
  Prediction predict_adapt(const Eigen::VectorXd& h, std::uint32_t) override { return predict(h); }
  Prediction predict(const Eigen::VectorXd& h) const override;
  const LinearHead& head() const { return head_; }

 private:
  LinearHead head_;
};

class PrototypeAdapter : public Adapter {
 public:
  /// Centroids start at the class means of the source features.
  PrototypeAdapter(const std::vector<Eigen::VectorXd>& features,
                   const std::vector<ClassLabel>& labels, std::size_t num_classes, double tau,
                   double margin);
  Prediction predict_adapt(const Eigen::VectorXd& h, std::uint32_t domain_id) override;
  Prediction predict(const Eigen::VectorXd& h) const override;
  const std::vector<Eigen::VectorXd>& centroids() const { return centroids_; }
  const std::vector<std::size_t>& counts() const { return counts_; }

 private:
  std::vector<Eigen::VectorXd> centroids_;
  std::vector<std::size_t> counts_;
  double tau_;
  double margin_;
};

class EntropyHead : public Adapter {
 public:
  EntropyHead(LinearHead head, double lr) : head_(std::move(head)), lr_(lr) {}
  /// Predicts with the current head, then takes one SGD step on the entropy.
  Prediction predict_adapt(const Eigen::VectorXd& h, std::uint32_t domain_id) override;
  Prediction predict(const Eigen::VectorXd& h) const override;
  const LinearHead& head() const { return head_; }

 private:
  LinearHead head_;
  double lr_;
};

class AdaNpcAdapter : public Adapter {
 public:
  AdaNpcAdapter(MemoryBank bank, AdaptConfig config);
  Prediction predict_adapt(const Eigen::VectorXd& h, std::uint32_t domain_id) override;
  Prediction predict(const Eigen::VectorXd& h) const override;
  const MemoryBank& bank() const { return bank_; }

 private:
  MemoryBank bank_;
  AdaptConfig config_;
};

/// AdaNPC with one BN layer in front of the classifier: per sample, the
/// running statistics take a streaming update, (gamma, beta) take one
/// entropy step, then the normalized feature goes through adapt_step.
class AdaNpcBnAdapter : public Adapter {
 public:
  AdaNpcBnAdapter(MemoryBank bank, BnLayer layer, AdaptConfig config, double bn_lr);
  Prediction predict_adapt(const Eigen::VectorXd& h, std::uint32_t domain_id) override;
  Prediction predict(const Eigen::VectorXd& h) const override;
  const MemoryBank& bank() const { return bank_; }
  const BnLayer& layer() const { return layer_; }

 private:
  MemoryBank bank_;
  BnLayer layer_;
  AdaptConfig config_;
  double bn_lr_;
};

/// Builds a method from encoded source features.
std::unique_ptr<Adapter> make_adapter(const BaselineSpec& spec,
                                      const std::vector<Eigen::VectorXd>& features,
                                      const std::vector<ClassLabel>& labels,
                                      std::size_t num_classes);

// ---- successive adaptation ---------------------------------------------

struct SuccessiveRow {
  std::size_t domain_index = 0;
  double during_accuracy = 0.0;
  double source_accuracy = 0.0;
};

struct SuccessiveResult {
  std::vector<SuccessiveRow> rows;  // row 0: before any adaptation
  // Memory-bank methods only.
  std::size_t source_entries_before = 0;
  std::size_t source_entries_after = 0;
  bool source_entries_unchanged = true;  // same (id, label, feature) multiset
  std::size_t bank_size_after = 0;
};

/// Streams domains 1..n-1 one sample at a time (order shuffled by seed)
/// through the method, recording accuracy during adaptation and held-out
/// d0 accuracy after each domain. Row 0 holds the pre-adaptation d0
/// accuracy in both columns.
SuccessiveResult run_successive(const DomainSequence& sequence, const BaselineSpec& method,
                                const EncoderParams& encoder, std::uint64_t seed);

void write_successive_csv(std::ostream& out,
                          const std::vector<std::pair<std::uint64_t, SuccessiveResult>>& runs);

// ---- inference benchmark -----------------------------------------------

struct BenchConfig {
  std::vector<std::size_t> sizes;
  std::size_t dim = 128;
  std::size_t k = 10;
  std::size_t n_queries = 200;
  std::size_t n_clusters = 0;  // 0: max(16, round(sqrt(n)))
  std::size_t nprobe = 0;      // 0: max(1, n_clusters / 16)
  int ivf_iterations = 10;
  std::size_t train_per_cluster = 64;
  std::size_t mixture_components = 0;  // 0: max(10, n / 1000)
  double spread = 0.5;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::string variant;  // exact | ivf
  std::size_t bank_size = 0;
  double p50_us = 0.0;
  double p95_us = 0.0;
  double qps = 0.0;
  double recall = 1.0;  // recall@k against exact
  std::size_t n_clusters = 0;
  std::size_t nprobe = 0;
  bool gate_ok = true;  // ivf with nprobe = n_clusters returned exact results
};

/// Seeded Gaussian mixture with unit-norm component directions; `spread`
/// is the per-point noise norm relative to the component direction.
std::vector<float> make_clustered_features(std::size_t n, std::size_t dim,
                                           std::size_t components, double spread,
                                           std::uint64_t seed);

/// One exact row and one ivf row per bank size.
std::vector<BenchRow> bench_inference(const BenchConfig& config);

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace adanpc::harness
