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

#include "adanpc/theory_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include <boost/math/special_functions/beta.hpp>

#include "adanpc/classifier.hpp"
#include "adanpc/core_math.hpp"
#include "adanpc/error.hpp"

namespace adanpc::theory {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  // splitmix64 finalizer
  std::uint64_t z = seed + tag * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

[[noreturn]] void infeasible(const std::string& what) {
  throw Error(ErrorCode::kInfeasibleParams, what);
}

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

PointCloud uniform_box(const Box& box, std::size_t n, std::uint64_t seed) {
  const auto d = box.lo.size();
  PointCloud out(static_cast<Eigen::Index>(n), d);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out(i, j) = box.lo[j] + (box.hi[j] - box.lo[j]) * u(rng);
  }
  return out;
}

}  // namespace

void ScenarioParams::validate() const {
  if (d < 1) infeasible("d must be >= 1");
  if (!(c_mu > 0.0 && c_mu <= 1.0)) infeasible("c_mu must be in (0, 1]");
  if (!(c_mu_star > 0.0 && c_mu_star <= 1.0)) infeasible("c_mu_star must be in (0, 1]");
  if (!(mu_minus > 0.0 && mu_minus <= mu_plus)) infeasible("need 0 < mu_minus <= mu_plus");
  if (mu_minus > 1.0) infeasible("mu_minus exceeds the source density 1");
  if (!(target_side > 0.0 && target_side <= 1.0)) infeasible("target_side must be in (0, 1]");
  if (!(r_mu > 0.0)) infeasible("r_mu must be > 0");
  if (d >= 2 && (1.0 - target_side) / 2.0 < r_mu) {
    infeasible("target_side leaves less than r_mu between the target and the source faces");
  }
  if (1.0 - cap_offset(c_mu, d) * r_mu - target_side < r_mu) {
    infeasible("c_mu, r_mu and target_side do not fit the target inside the source cube");
  }
  if (!(C_lip > 0.0)) infeasible("C_lip must be > 0");
  if (!(beta > 0.0 && beta <= 1.0)) infeasible("beta must be in (0, 1] for a Lipschitz eta");
  if (!(g_width > 0.0)) infeasible("g_width must be > 0");
  if (!(C_ada >= 0.0 && C_ada <= 1.0)) infeasible("C_ada must be in [0, 1]");
  if (shift_kind == ShiftKind::kCovariate && C_ada != 0.0) {
    infeasible("covariate shift requires C_ada = 0");
  }
  if (C_beta < eta_shape(*this).tight_C_beta) {
    infeasible("C_beta is below the low-noise constant of the construction");
  }
}

void to_json(nlohmann::json& j, const ScenarioParams& p) {
  j = {{"d", p.d},
       {"c_mu", p.c_mu},
       {"c_mu_star", p.c_mu_star},
       {"mu_minus", p.mu_minus},
       {"mu_plus", p.mu_plus},
       {"r_mu", p.r_mu},
       {"C_lip", p.C_lip},
       {"beta", p.beta},
       {"C_beta", p.C_beta},
       {"C_ada", p.C_ada},
       {"shift_kind", p.shift_kind == ShiftKind::kCovariate ? "covariate" : "posterior"},
       {"target_side", p.target_side},
       {"g_width", p.g_width}};
}

void from_json(const nlohmann::json& j, ScenarioParams& p) {
  p.d = j.value("d", p.d);
  p.c_mu = j.value("c_mu", p.c_mu);
  p.c_mu_star = j.value("c_mu_star", p.c_mu_star);
  p.mu_minus = j.value("mu_minus", p.mu_minus);
  p.mu_plus = j.value("mu_plus", p.mu_plus);
  p.r_mu = j.value("r_mu", p.r_mu);
  p.C_lip = j.value("C_lip", p.C_lip);
  p.beta = j.value("beta", p.beta);
  p.C_beta = j.value("C_beta", p.C_beta);
  p.C_ada = j.value("C_ada", p.C_ada);
  p.target_side = j.value("target_side", p.target_side);
  p.g_width = j.value("g_width", p.g_width);
  if (j.contains("shift_kind")) {
    auto s = j.at("shift_kind").get<std::string>();
    if (s == "covariate") {
      p.shift_kind = ShiftKind::kCovariate;
    } else if (s == "posterior") {
      p.shift_kind = ShiftKind::kPosterior;
    } else {
      throw Error(ErrorCode::kBadParams, "shift_kind must be covariate or posterior");
    }
  }
}

bool Box::contains(const Point& x) const {
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x[j] < lo[j] || x[j] > hi[j]) return false;
  }
  return true;
}

Box source_box(const ScenarioParams& p) {
  return {Point::Zero(p.d), Point::Ones(p.d)};
}

double ball_fraction_below(double s, int d) {
  if (d < 1) throw Error(ErrorCode::kBadParams, "d must be >= 1");
  s = std::clamp(s, -1.0, 1.0);
  // u_0 of a uniform point in the unit d-ball has density proportional to
  // (1 - u^2)^((d-1)/2); its CDF is an incomplete beta in u^2.
  double half = 0.5 * boost::math::ibeta(0.5, (d + 1) / 2.0, s * s);
  return s >= 0.0 ? 0.5 + half : 0.5 - half;
}

double cap_offset(double c_mu, int d) {
  if (!(c_mu > 0.0 && c_mu <= 1.0)) throw Error(ErrorCode::kBadParams, "c_mu must be in (0, 1]");
  if (c_mu == 1.0) return 1.0;
  double q = std::abs(2.0 * c_mu - 1.0);
  double s = std::sqrt(boost::math::ibeta_inv(0.5, (d + 1) / 2.0, q));
  return c_mu >= 0.5 ? s : -s;
}

Box target_box(const ScenarioParams& p) {
  const double l = p.target_side;
  const double a = (1.0 - l) / 2.0;
  Box b{Point::Constant(p.d, a), Point::Constant(p.d, a + l)};
  b.hi[0] = 1.0 - cap_offset(p.c_mu, p.d) * p.r_mu;
  b.lo[0] = b.hi[0] - l;
  return b;
}

EtaShape eta_shape(const ScenarioParams& p) {
  EtaShape s;
  const double l = p.target_side;
  double reach = 0.0;
  if (p.d >= 2) {
    // Boundary across the shift direction, through the middle of both cubes.
    s.axis = p.d - 1;
    s.boundary = 0.5;
    reach = 0.5;
  } else {
    const Box t = target_box(p);
    s.axis = 0;
    s.boundary = t.hi[0] - l / 2.0;
    reach = std::max(s.boundary, std::max(1.0, t.hi[0]) - s.boundary);
  }
  s.slope = p.C_lip * p.beta / std::pow(reach, 1.0 / p.beta - 1.0);
  // The target density along the boundary axis is 1/l, so P(|z| < r) <= 2r/l.
  s.tight_C_beta = 2.0 / (l * std::pow(s.slope, p.beta));
  return s;
}

PointCloud TheoryScenario::sample(Which which, std::size_t n, std::uint64_t seed) const {
  return which == Which::kSource ? source_sampler(n, seed) : target_sampler(n, seed);
}

double TheoryScenario::eta(Which which, const Point& x) const {
  return which == Which::kSource ? eta_S(x) : eta_U(x);
}

TheoryScenario make_scenario(const ScenarioParams& params, std::uint64_t /*seed*/) {
  params.validate();
  TheoryScenario sc;
  sc.params = params;
  Box src = source_box(params);
  Box tgt = target_box(params);
  sc.source_sampler = [src](std::size_t n, std::uint64_t seed) { return uniform_box(src, n, seed); };
  sc.target_sampler = [tgt](std::size_t n, std::uint64_t seed) { return uniform_box(tgt, n, seed); };
  const EtaShape shape = eta_shape(params);
  const double inv_beta = 1.0 / params.beta;
  sc.eta_S = [shape, inv_beta](const Point& x) {
    double z = x[shape.axis] - shape.boundary;
    double mag = shape.slope * std::pow(std::abs(z), inv_beta);
    return clip01(0.5 + (z < 0.0 ? -mag : mag));
  };
  if (params.shift_kind == ShiftKind::kCovariate || params.C_ada == 0.0) {
    sc.eta_U = sc.eta_S;
  } else {
    sc.eta_U = [eta_s = sc.eta_S, c = params.C_ada, w = params.g_width](const Point& x) {
      double e = eta_s(x);
      double g = std::clamp((e - 0.5) / w, -1.0, 1.0);
      return clip01(e + c * g);
    };
  }
  return sc;
}

int bayes_classify(const TheoryScenario& scenario, const Point& x, Which which) {
  return scenario.eta(which, x) >= 0.5 ? 1 : 0;
}

stats::MeanSe bayes_risk(const TheoryScenario& scenario, Which which, std::size_t n_mc,
                         std::uint64_t seed) {
  if (n_mc == 0) throw Error(ErrorCode::kEmptyInput, "n_mc must be >= 1");
  PointCloud x = scenario.sample(which, n_mc, seed);
  std::vector<double> r(n_mc);
  for (std::size_t i = 0; i < n_mc; ++i) {
    double e = scenario.eta(which, x.row(static_cast<Eigen::Index>(i)).transpose());
    r[i] = std::min(e, 1.0 - e);
  }
  return stats::mean_se(r);
}

std::vector<int> draw_labels(const TheoryScenario& scenario, Which which,
                             const PointCloud& points, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> y(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    y[static_cast<std::size_t>(i)] = u(rng) < scenario.eta(which, points.row(i).transpose()) ? 1 : 0;
  }
  return y;
}

stats::MeanSe excess_error(const BinaryClassifier& classifier, const TheoryScenario& scenario,
                           Which which, std::size_t n_test, std::uint64_t seed) {
  if (n_test == 0) throw Error(ErrorCode::kEmptyInput, "n_test must be >= 1");
  PointCloud x = scenario.sample(which, n_test, derive_seed(seed, 1));
  std::vector<int> y = draw_labels(scenario, which, x, derive_seed(seed, 2));
  std::vector<double> diff(n_test);
  for (std::size_t i = 0; i < n_test; ++i) {
    Point xi = x.row(static_cast<Eigen::Index>(i)).transpose();
    int f = classifier(xi);
    int b = bayes_classify(scenario, xi, which);
    diff[i] = static_cast<double>(f != y[i]) - static_cast<double>(b != y[i]);
  }
  return stats::mean_se(diff);
}

double r0_radius(double k, double c_mu, double mu_minus, int d, double n_s) {
  if (!(k > 0 && c_mu > 0 && mu_minus > 0 && d > 0 && n_s > 0)) {
    throw Error(ErrorCode::kBadParams, "r0_radius needs positive arguments");
  }
  return std::pow(2.0 * k / (c_mu * mu_minus * unit_ball_volume(d) * n_s), 1.0 / d);
}

std::vector<std::size_t> knn_euclidean(const PointCloud& points, std::size_t count,
                                       const Point& x, std::size_t k) {
  k = std::min(k, count);
  std::vector<std::pair<double, std::size_t>> d(count);
  for (std::size_t i = 0; i < count; ++i) {
    d[i] = {(points.row(static_cast<Eigen::Index>(i)).transpose() - x).squaredNorm(), i};
  }
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = d[i].second;
  return out;
}

std::vector<std::size_t> omega_restrict(const PointCloud& source, const PointCloud& target,
                                        std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kBadParams, "k must be >= 1");
  if (static_cast<std::size_t>(source.rows()) < k) {
    throw Error(ErrorCode::kNotEnoughSource, "fewer source points than k");
  }
  if (source.cols() != target.cols()) throw Error(ErrorCode::kDimMismatch, "cloud dims differ");
  std::set<std::size_t> keep;
  for (Eigen::Index t = 0; t < target.rows(); ++t) {
    for (std::size_t i : knn_euclidean(source, static_cast<std::size_t>(source.rows()),
                                       target.row(t).transpose(), k)) {
      keep.insert(i);
    }
  }
  return {keep.begin(), keep.end()};
}

PointCloud select_rows(const PointCloud& points, const std::vector<std::size_t>& rows) {
  PointCloud out(static_cast<Eigen::Index>(rows.size()), points.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = points.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

std::vector<std::size_t> optimal_assignment(const PointCloud& P, const PointCloud& Q) {
  if (P.rows() != Q.rows()) throw Error(ErrorCode::kSizeMismatch, "clouds differ in size");
  if (P.cols() != Q.cols()) throw Error(ErrorCode::kDimMismatch, "cloud dims differ");
  const auto n = static_cast<std::size_t>(P.rows());
  if (n > kMaxExactW1) throw Error(ErrorCode::kTooLarge, "exact solver is limited to 512 points");
  if (n == 0) return {};
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      cost[i * n + j] =
          (P.row(static_cast<Eigen::Index>(i)) - Q.row(static_cast<Eigen::Index>(j))).norm();
    }
  }
  // Hungarian method with potentials, 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      std::size_t i0 = p[j0], j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

double wasserstein1_exact(const PointCloud& P, const PointCloud& Q) {
  std::vector<std::size_t> a = optimal_assignment(P, Q);
  if (a.empty()) throw Error(ErrorCode::kEmptyInput, "empty point clouds");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    total += (P.row(static_cast<Eigen::Index>(i)) - Q.row(static_cast<Eigen::Index>(a[i]))).norm();
  }
  return total / static_cast<double>(a.size());
}

double wasserstein1_resampled(const PointCloud& P, const PointCloud& Q, std::uint64_t seed) {
  if (P.rows() == Q.rows()) return wasserstein1_exact(P, Q);
  const bool p_larger = P.rows() > Q.rows();
  const PointCloud& big = p_larger ? P : Q;
  const auto m = static_cast<std::size_t>(std::min(P.rows(), Q.rows()));
  std::vector<std::size_t> idx(static_cast<std::size_t>(big.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(m);
  PointCloud sub = select_rows(big, idx);
  return p_larger ? wasserstein1_exact(sub, Q) : wasserstein1_exact(P, sub);
}

Vote uniform_vote(const std::vector<int>& labels, const std::vector<std::size_t>& neighbors) {
  if (neighbors.empty()) throw Error(ErrorCode::kEmptyBank, "no neighbors to vote");
  std::vector<double> scores(2, 0.0);
  const double w = 1.0 / static_cast<double>(neighbors.size());
  for (std::size_t i : neighbors) scores[static_cast<std::size_t>(labels[i])] += w;
  std::vector<double> p = softmax(scores);
  std::size_t c = argmax(p);
  return {static_cast<int>(c), p[c]};
}

std::size_t log_k(std::size_t n_s) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::log(static_cast<double>(n_s)))));
}

// ---- experiments -------------------------------------------------------

std::optional<Experiment> parse_experiment(const std::string& name) {
  if (name == "prop1") return Experiment::kProp1;
  if (name == "prop2") return Experiment::kProp2;
  if (name == "prop3") return Experiment::kProp3;
  return std::nullopt;
}

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::kProp1: return "prop1";
    case Experiment::kProp2: return "prop2";
    case Experiment::kProp3: return "prop3";
  }
  return "unknown";
}

namespace {

const std::set<std::string>& scenario_keys() {
  static const std::set<std::string> keys{"d",      "c_mu",   "c_mu_star", "mu_minus", "mu_plus",
                                          "r_mu",   "C_lip",  "beta",      "C_beta",   "C_ada",
                                          "shift_kind", "target_side", "g_width"};
  return keys;
}

std::set<std::string> experiment_keys(Experiment e) {
  switch (e) {
    case Experiment::kProp1: return {"n_s", "n_t", "k"};
    case Experiment::kProp2: return {"n_s", "n_test", "k"};
    case Experiment::kProp3: return {"n_s", "n_u", "n_test", "k", "margin"};
  }
  return {};
}

std::vector<std::string> metric_names(Experiment e) {
  switch (e) {
    case Experiment::kProp1: return {"w1_omega", "w1_full", "omega_better", "omega_size", "r0"};
    case Experiment::kProp2: return {"k", "excess_error", "excess_error_mc_se", "bayes_risk"};
    case Experiment::kProp3:
      return {"k", "n_inserted", "excess_source_only", "excess_mixed", "excess_diff"};
  }
  return {};
}

std::size_t get_size(const nlohmann::json& cell, const char* key, std::size_t fallback) {
  if (!cell.contains(key)) return fallback;
  auto v = cell.at(key).get<std::int64_t>();
  if (v < 0) throw Error(ErrorCode::kBadParams, std::string(key) + " must be >= 0");
  return static_cast<std::size_t>(v);
}

std::vector<double> run_cell(Experiment e, const nlohmann::json& cell, std::uint64_t seed) {
  ScenarioParams params = cell.get<ScenarioParams>();
  TheoryScenario sc = make_scenario(params, seed);
  const std::size_t n_s = get_size(cell, "n_s", 1000);
  if (n_s == 0) throw Error(ErrorCode::kBadParams, "n_s must be >= 1");
  PointCloud source = sc.sample(Which::kSource, n_s, derive_seed(seed, 11));

  if (e == Experiment::kProp1) {
    const std::size_t n_t = get_size(cell, "n_t", 100);
    const std::size_t k = get_size(cell, "k", 3);
    if (n_t == 0) throw Error(ErrorCode::kBadParams, "n_t must be >= 1");
    PointCloud target = sc.sample(Which::kTarget, n_t, derive_seed(seed, 12));
    auto omega = omega_restrict(source, target, k);
    double w_omega = wasserstein1_resampled(select_rows(source, omega), target, derive_seed(seed, 13));
    double w_full = wasserstein1_resampled(source, target, derive_seed(seed, 14));
    double r0 = r0_radius(static_cast<double>(k), params.c_mu, params.mu_minus, params.d,
                          static_cast<double>(n_s));
    return {w_omega, w_full, w_omega <= w_full ? 1.0 : 0.0, static_cast<double>(omega.size()), r0};
  }

  std::vector<int> labels = draw_labels(sc, Which::kSource, source, derive_seed(seed, 15));
  const std::size_t n_test = get_size(cell, "n_test", 2000);
  const std::size_t k = get_size(cell, "k", 0) == 0 ? log_k(n_s) : get_size(cell, "k", 0);
  const std::uint64_t test_seed = derive_seed(seed, 16);
  auto knn_classifier = [&](const PointCloud& bank, std::size_t count, const std::vector<int>& y) {
    return [&bank, count, &y, k](const Point& x) {
      return uniform_vote(y, knn_euclidean(bank, count, x, k)).label;
    };
  };

  if (e == Experiment::kProp2) {
    stats::MeanSe ex = excess_error(knn_classifier(source, n_s, labels), sc, Which::kTarget,
                                    n_test, test_seed);
    stats::MeanSe br = bayes_risk(sc, Which::kTarget, n_test, derive_seed(test_seed, 1));
    return {static_cast<double>(k), ex.mean, ex.se, br.mean};
  }

  // prop3: stream unlabeled target points through the confidence gate.
  const std::size_t n_u = get_size(cell, "n_u", 1000);
  const double margin = cell.value("margin", default_margin(2));
  PointCloud stream = sc.sample(Which::kTarget, n_u, derive_seed(seed, 17));
  PointCloud bank(static_cast<Eigen::Index>(n_s + n_u), source.cols());
  bank.topRows(static_cast<Eigen::Index>(n_s)) = source;
  std::vector<int> bank_labels = labels;
  std::size_t count = n_s;
  for (Eigen::Index i = 0; i < stream.rows(); ++i) {
    Point x = stream.row(i).transpose();
    Vote v = uniform_vote(bank_labels, knn_euclidean(bank, count, x, k));
    if (v.confidence > margin) {
      bank.row(static_cast<Eigen::Index>(count++)) = x.transpose();
      bank_labels.push_back(v.label);
    }
  }
  stats::MeanSe src = excess_error(knn_classifier(source, n_s, labels), sc, Which::kTarget,
                                   n_test, test_seed);
  stats::MeanSe mix = excess_error(knn_classifier(bank, count, bank_labels), sc, Which::kTarget,
                                   n_test, test_seed);
  return {static_cast<double>(k), static_cast<double>(count - n_s), src.mean, mix.mean,
          mix.mean - src.mean};
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string axis_text(const nlohmann::json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace

ExperimentReport run_experiment(Experiment experiment, const nlohmann::json& grid,
                                const std::vector<std::uint64_t>& seeds) {
  auto start = std::chrono::steady_clock::now();
  if (!grid.is_object()) throw Error(ErrorCode::kBadParams, "grid must be a JSON object");
  if (seeds.empty()) throw Error(ErrorCode::kBadParams, "at least one seed is required");
  const auto own = experiment_keys(experiment);
  ExperimentReport report;
  report.experiment = experiment;
  report.metric_names = metric_names(experiment);
  nlohmann::json base = nlohmann::json::object();
  std::vector<const nlohmann::json*> axes;
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    if (!scenario_keys().contains(it.key()) && !own.contains(it.key())) {
      throw Error(ErrorCode::kBadParams, "unknown grid key '" + it.key() + "'");
    }
    if (it.value().is_array()) {
      if (it.value().empty()) throw Error(ErrorCode::kBadParams, "empty axis '" + it.key() + "'");
      report.axis_names.push_back(it.key());
      axes.push_back(&it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
  std::size_t total = 1;
  for (const auto* axis : axes) total *= axis->size();
  for (std::size_t index = 0; index < total; ++index) {
    nlohmann::json cell = base;
    CellResult result;
    // Last axis varies fastest.
    std::vector<std::size_t> pos(axes.size());
    for (std::size_t a = axes.size(), rest = index; a-- > 0;) {
      pos[a] = rest % axes[a]->size();
      rest /= axes[a]->size();
    }
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const auto& v = (*axes[a])[pos[a]];
      cell[report.axis_names[a]] = v;
      result.axis_values.push_back(axis_text(v));
    }
    for (std::uint64_t seed : seeds) {
      result.seeds.push_back(seed);
      result.per_seed.push_back(run_cell(experiment, cell, seed));
    }
    for (std::size_t m = 0; m < report.metric_names.size(); ++m) {
      std::vector<double> col;
      for (const auto& row : result.per_seed) col.push_back(row[m]);
      result.aggregate.push_back(stats::mean_se(col));
    }
    report.cells.push_back(std::move(result));
  }
  report.runtime = std::chrono::steady_clock::now() - start;
  return report;
}

ExperimentReport run_prop1(const nlohmann::json& grid, const std::vector<std::uint64_t>& seeds) {
  return run_experiment(Experiment::kProp1, grid, seeds);
}
ExperimentReport run_prop2(const nlohmann::json& grid, const std::vector<std::uint64_t>& seeds) {
  return run_experiment(Experiment::kProp2, grid, seeds);
}
ExperimentReport run_prop3(const nlohmann::json& grid, const std::vector<std::uint64_t>& seeds) {
  return run_experiment(Experiment::kProp3, grid, seeds);
}

void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  out << "# experiment=" << experiment_name(report.experiment)
      << "; row_type=seed rows hold one replication, row_type=aggregate rows hold the mean over"
         " seeds with <metric>_se the standard error\n";
  if (report.experiment == Experiment::kProp1) out << "# kappa_S, kappa_Omega: not computed\n";
  out << "row_type,cell";
  for (const auto& a : report.axis_names) out << ',' << a;
  out << ",seed,n_seeds";
  for (const auto& m : report.metric_names) out << ',' << m;
  for (const auto& m : report.metric_names) out << ',' << m << "_se";
  out << '\n';
  auto prefix = [&](const char* type, std::size_t c) {
    out << type << ',' << c;
    for (const auto& v : report.cells[c].axis_values) out << ',' << v;
  };
  for (std::size_t c = 0; c < report.cells.size(); ++c) {
    const CellResult& cell = report.cells[c];
    for (std::size_t s = 0; s < cell.seeds.size(); ++s) {
      prefix("seed", c);
      out << ',' << cell.seeds[s] << ",1";
      for (double v : cell.per_seed[s]) out << ',' << format_double(v);
      for (std::size_t m = 0; m < report.metric_names.size(); ++m) out << ',';
      out << '\n';
    }
  }
  for (std::size_t c = 0; c < report.cells.size(); ++c) {
    const CellResult& cell = report.cells[c];
    prefix("aggregate", c);
    out << ",," << cell.seeds.size();
    for (const auto& a : cell.aggregate) out << ',' << format_double(a.mean);
    for (const auto& a : cell.aggregate) out << ',' << format_double(a.se);
    out << '\n';
  }
}

}  // namespace adanpc::theory
