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

// Synthetic scenarios for probing the nearest-neighbor adaptation bounds:
// regression-function oracles, Bayes and excess error, the r0 radius, the
// Omega restriction and exact Wasserstein-1 between point clouds.
//
// Built-in construction (make_scenario):
//   source  uniform on [0,1]^d
//   target  uniform on a cube of side l: axis 0 spans [h - l, h], the other
//           axes [a, a + l] with a = (1 - l) / 2. The outer face h is placed
//           so that a ball of radius r_mu centred on it keeps exactly a c_mu
//           fraction of its volume inside the source; every other target
//           point keeps a larger fraction. c_mu = 1 puts the face r_mu inside
//           the source, c_mu = 1/2 on the source face, c_mu < 1/2 outside it.
//   eta_S   clip(1/2 + sign(z) s |z|^(1/beta)) with z = x_{d-1} - 1/2, a
//           boundary across the shift direction through both cubes (for
//           d = 1, z = x_0 minus the target midpoint); s is the largest
//           slope allowed by C_lip over both supports.
//   eta_U   covariate: eta_S. posterior: clip(eta_S + C_ada g) with
//           g = clamp((eta_S - 1/2) / g_width, -1, 1), so the Bayes decision
//           is shared and sup |eta_S - eta_U| <= C_ada.

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "adanpc/stats.hpp"

namespace adanpc::theory {

/// Rows are points.
using PointCloud = Eigen::MatrixXd;
using Point = Eigen::VectorXd;

enum class ShiftKind { kCovariate, kPosterior };
enum class Which { kSource, kTarget };

struct ScenarioParams {
  int d = 2;
  double c_mu = 1.0;
  double c_mu_star = 1.0;
  double mu_minus = 1.0;
  double mu_plus = 1.0;
  double r_mu = 0.1;
  double C_lip = 1.0;
  double beta = 1.0;
  double C_beta = 10.0;
  double C_ada = 0.0;
  ShiftKind shift_kind = ShiftKind::kCovariate;
  double target_side = 0.5;
  double g_width = 0.1;

  /// Throws InfeasibleParams.
  void validate() const;
};

void to_json(nlohmann::json& j, const ScenarioParams& p);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, ScenarioParams& p);

using Sampler = std::function<PointCloud(std::size_t n, std::uint64_t seed)>;
using EtaFn = std::function<double(const Point&)>;

struct TheoryScenario {
  ScenarioParams params;
  Sampler source_sampler;
  Sampler target_sampler;
  EtaFn eta_S;
  EtaFn eta_U;

  PointCloud sample(Which which, std::size_t n, std::uint64_t seed) const;
  double eta(Which which, const Point& x) const;
};

/// The built-in construction above. The seed is accepted for interface
/// symmetry; the construction itself is deterministic and sampling takes
/// its own seeds.
TheoryScenario make_scenario(const ScenarioParams& params, std::uint64_t seed = 0);

/// Slope s and boundary b of the built-in eta.
struct EtaShape {
  int axis = 0;
  double slope = 0.0;
  double boundary = 0.0;
  double tight_C_beta = 0.0;  // smallest C_beta the target marginal admits
};
EtaShape eta_shape(const ScenarioParams& params);

/// Fraction of the unit d-ball with first coordinate <= s.
double ball_fraction_below(double s, int d);

/// s in [-1, 1] with ball_fraction_below(s, d) = c_mu.
double cap_offset(double c_mu, int d);

/// Support bounds of the built-in construction.
struct Box {
  Point lo;
  Point hi;
  bool contains(const Point& x) const;
};
Box source_box(const ScenarioParams& params);
Box target_box(const ScenarioParams& params);

int bayes_classify(const TheoryScenario& scenario, const Point& x, Which which);

/// Monte-Carlo E[min(eta, 1 - eta)] under the `which` marginal.
stats::MeanSe bayes_risk(const TheoryScenario& scenario, Which which, std::size_t n_mc,
                         std::uint64_t seed);

using BinaryClassifier = std::function<int(const Point&)>;

/// err(f) - err(Bayes) on the same draws (x, y). Bayes scores 0 exactly.
stats::MeanSe excess_error(const BinaryClassifier& classifier, const TheoryScenario& scenario,
                           Which which, std::size_t n_test, std::uint64_t seed);

/// (2k / (c_mu mu_minus pi_d n_s))^(1/d). Throws BadParams on non-positive input.
double r0_radius(double k, double c_mu, double mu_minus, int d, double n_s);

/// Indices (ascending) of the union of each target point's k nearest
/// source points. Ties go to the lower source index. Throws NotEnoughSource.
std::vector<std::size_t> omega_restrict(const PointCloud& source, const PointCloud& target,
                                        std::size_t k);

PointCloud select_rows(const PointCloud& points, const std::vector<std::size_t>& rows);

inline constexpr std::size_t kMaxExactW1 = 512;

/// Optimal assignment of rows of P to rows of Q under Euclidean cost.
/// assignment[i] is the Q row matched to P row i.
std::vector<std::size_t> optimal_assignment(const PointCloud& P, const PointCloud& Q);

/// min over permutations of (1/n) sum_i |p_i - q_sigma(i)|, summed in i
/// order. Throws SizeMismatch, TooLarge (n > 512), DimMismatch.
double wasserstein1_exact(const PointCloud& P, const PointCloud& Q);

/// Like wasserstein1_exact, but the larger cloud is first subsampled
/// without replacement to the size of the smaller one.
double wasserstein1_resampled(const PointCloud& P, const PointCloud& Q, std::uint64_t seed);

/// Indices of the k nearest rows of points[0, count) to x (Euclidean),
/// nearest first, ties to the lower index.
std::vector<std::size_t> knn_euclidean(const PointCloud& points, std::size_t count,
                                       const Point& x, std::size_t k);

/// Uniform-weight vote over binary labels, routed through the same
/// softmax/argmax as the engine classifier.
struct Vote {
  int label = 0;
  double confidence = 0.0;
};
Vote uniform_vote(const std::vector<int>& labels, const std::vector<std::size_t>& neighbors);

/// ceil(ln n_s), at least 1.
std::size_t log_k(std::size_t n_s);

std::vector<int> draw_labels(const TheoryScenario& scenario, Which which,
                             const PointCloud& points, std::uint64_t seed);

// ---- experiments -------------------------------------------------------

enum class Experiment { kProp1, kProp2, kProp3 };

std::optional<Experiment> parse_experiment(const std::string& name);
std::string experiment_name(Experiment e);

struct CellResult {
  std::vector<std::string> axis_values;  // JSON text of each axis value
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<double>> per_seed;  // [seed][metric]
  std::vector<stats::MeanSe> aggregate;       // [metric]
};

struct ExperimentReport {
  Experiment experiment = Experiment::kProp1;
  std::vector<std::string> axis_names;
  std::vector<std::string> metric_names;
  std::vector<CellResult> cells;
  std::chrono::duration<double> runtime{};  // not written to CSV
};

/// Grid JSON: array-valued keys are sweep axes (Cartesian product in key
/// order), scalar keys are fixed. Keys are scenario fields plus the
/// experiment's own (prop1: n_s, n_t, k; prop2: n_s, n_test, k;
/// prop3: n_s, n_u, n_test, k, margin). Throws BadParams on unknown keys.
ExperimentReport run_experiment(Experiment experiment, const nlohmann::json& grid,
                                const std::vector<std::uint64_t>& seeds);

ExperimentReport run_prop1(const nlohmann::json& grid, const std::vector<std::uint64_t>& seeds);
ExperimentReport run_prop2(const nlohmann::json& grid, const std::vector<std::uint64_t>& seeds);
ExperimentReport run_prop3(const nlohmann::json& grid, const std::vector<std::uint64_t>& seeds);

/// One row per (cell, seed), then one aggregate row per cell.
void write_report_csv(std::ostream& out, const ExperimentReport& report);

}  // namespace adanpc::theory
