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

#include "adanpc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

#include "adanpc/bn_adapt.hpp"
#include "adanpc/core_math.hpp"
#include "adanpc/error.hpp"

namespace adanpc::harness {

// ---- rotated blobs -----------------------------------------------------

void RotatedSequenceSpec::validate() const {
  if (n_domains < 2) throw Error(ErrorCode::kBadParams, "n_domains must be >= 2");
  if (n_classes < 2) throw Error(ErrorCode::kBadParams, "n_classes must be >= 2");
  if (n_per_domain == 0) throw Error(ErrorCode::kBadParams, "n_per_domain must be >= 1");
  if (n_source_test == 0) throw Error(ErrorCode::kBadParams, "n_source_test must be >= 1");
  if (!(radius > 0.0)) throw Error(ErrorCode::kBadParams, "radius must be > 0");
  if (!(sigma >= 0.0)) throw Error(ErrorCode::kBadParams, "sigma must be >= 0");
  if (!std::isfinite(angle_step_deg)) throw Error(ErrorCode::kBadParams, "angle_step_deg");
  if (lift_dim == 1) throw Error(ErrorCode::kBadParams, "lift_dim must be 0 or >= 2");
}

void to_json(nlohmann::json& j, const RotatedSequenceSpec& s) {
  j = {{"n_domains", s.n_domains},       {"angle_step_deg", s.angle_step_deg},
       {"n_per_domain", s.n_per_domain}, {"n_classes", s.n_classes},
       {"n_source_test", s.n_source_test}, {"radius", s.radius},
       {"sigma", s.sigma},               {"lift_dim", s.lift_dim},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, RotatedSequenceSpec& s) {
  s.n_domains = j.value("n_domains", s.n_domains);
  s.angle_step_deg = j.value("angle_step_deg", s.angle_step_deg);
  s.n_per_domain = j.value("n_per_domain", s.n_per_domain);
  s.n_classes = j.value("n_classes", s.n_classes);
  s.n_source_test = j.value("n_source_test", s.n_source_test);
  s.radius = j.value("radius", s.radius);
  s.sigma = j.value("sigma", s.sigma);
  s.lift_dim = j.value("lift_dim", s.lift_dim);
  s.seed = j.value("seed", s.seed);
}

Eigen::Matrix2d rotation(double degrees) {
  const double t = degrees * std::numbers::pi / 180.0;
  Eigen::Matrix2d r;
  r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  return r;
}

namespace {

Eigen::Vector2d base_center(const RotatedSequenceSpec& spec, std::size_t c) {
  const double t = 2.0 * std::numbers::pi * static_cast<double>(c) /
                   static_cast<double>(spec.n_classes);
  return {spec.radius * std::cos(t), spec.radius * std::sin(t)};
}

Dataset draw_domain(const DomainSequence& seq, std::size_t domain, std::size_t n,
                    std::mt19937_64& rng) {
  const auto& spec = seq.spec;
  std::normal_distribution<double> noise(0.0, 1.0);
  const Eigen::Matrix2d rot = rotation(static_cast<double>(domain) * spec.angle_step_deg);
  Dataset out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<ClassLabel>(i % spec.n_classes);
    Eigen::Vector2d p = base_center(spec, c);
    p.x() += spec.sigma * noise(rng);
    p.y() += spec.sigma * noise(rng);
    out.push_back({seq.lift * (rot * p), c, static_cast<std::uint32_t>(domain)});
  }
  return out;
}

}  // namespace

DomainSequence make_rotated_sequence(const RotatedSequenceSpec& spec) {
  spec.validate();
  DomainSequence seq;
  seq.spec = spec;
  std::mt19937_64 rng(spec.seed);
  const std::size_t dim = spec.dim();
  if (dim == 2) {
    seq.lift = Eigen::MatrixXd::Identity(2, 2);
  } else {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd a(dim, 2);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    seq.lift = qr.householderQ() * Eigen::MatrixXd::Identity(dim, 2);
  }
  for (std::size_t d = 0; d < spec.n_domains; ++d) {
    seq.domains.push_back(draw_domain(seq, d, spec.n_per_domain, rng));
  }
  seq.source_test = draw_domain(seq, 0, spec.n_source_test, rng);
  return seq;
}

Eigen::VectorXd class_center(const DomainSequence& seq, std::size_t c, std::size_t domain) {
  return seq.lift *
         (rotation(static_cast<double>(domain) * seq.spec.angle_step_deg) * base_center(seq.spec, c));
}

// ---- baselines ---------------------------------------------------------

std::optional<BaselineKind> parse_baseline(const std::string& name) {
  if (name == "frozen_linear") return BaselineKind::kFrozenLinear;
  if (name == "prototype") return BaselineKind::kPrototype;
  if (name == "entropy_head") return BaselineKind::kEntropyHead;
  if (name == "adanpc") return BaselineKind::kAdaNpc;
  if (name == "adanpc_bn") return BaselineKind::kAdaNpcBn;
  return std::nullopt;
}

std::string baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kFrozenLinear: return "frozen_linear";
    case BaselineKind::kPrototype: return "prototype";
    case BaselineKind::kEntropyHead: return "entropy_head";
    case BaselineKind::kAdaNpc: return "adanpc";
    case BaselineKind::kAdaNpcBn: return "adanpc_bn";
  }
  return "unknown";
}

BaselineSpec baseline_from_json(const std::string& name, const nlohmann::json& j) {
  auto kind = parse_baseline(name);
  if (!kind) throw Error(ErrorCode::kBadParams, "unknown method '" + name + "'");
  BaselineSpec s;
  s.kind = *kind;
  s.k = j.value("k", s.k);
  if (j.contains("margin")) s.margin = j.at("margin").get<double>();
  s.prototype_tau = j.value("prototype_tau", s.prototype_tau);
  s.entropy_lr = j.value("entropy_lr", s.entropy_lr);
  s.head_epochs = j.value("head_epochs", s.head_epochs);
  s.head_lr = j.value("head_lr", s.head_lr);
  s.bn_lr = j.value("bn_lr", s.bn_lr);
  s.bn_momentum = j.value("bn_momentum", s.bn_momentum);
  return s;
}

std::vector<double> LinearHead::probs(const Eigen::VectorXd& h) const {
  Eigen::VectorXd s = weight.transpose() * h + bias;
  return softmax(std::vector<double>(s.data(), s.data() + s.size()));
}

namespace {

Prediction from_probs(std::vector<double> probs) {
  Prediction p;
  p.label = static_cast<ClassLabel>(argmax(probs));
  p.confidence = probs[p.label];
  p.probs = std::move(probs);
  return p;
}

// dH/ds_c = -p_c (log p_c + H)
Eigen::VectorXd entropy_grad_scores(const std::vector<double>& p) {
  const double h = entropy(p);
  Eigen::VectorXd g(static_cast<Eigen::Index>(p.size()));
  for (std::size_t c = 0; c < p.size(); ++c) {
    g[static_cast<Eigen::Index>(c)] = p[c] > 0.0 ? -p[c] * (std::log(p[c]) + h) : 0.0;
  }
  return g;
}

}  // namespace

LinearHead train_linear_head(const std::vector<Eigen::VectorXd>& features,
                             const std::vector<ClassLabel>& labels, std::size_t num_classes,
                             std::size_t epochs, double lr) {
  if (features.empty()) throw Error(ErrorCode::kEmptyInput, "no training features");
  if (features.size() != labels.size()) throw Error(ErrorCode::kSizeMismatch, "labels");
  const auto dim = features[0].size();
  const auto C = static_cast<Eigen::Index>(num_classes);
  LinearHead head{Eigen::MatrixXd::Zero(dim, C), Eigen::VectorXd::Zero(C)};
  const double scale = 1.0 / static_cast<double>(features.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    Eigen::MatrixXd gw = Eigen::MatrixXd::Zero(dim, C);
    Eigen::VectorXd gb = Eigen::VectorXd::Zero(C);
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (labels[i] >= num_classes) throw Error(ErrorCode::kLabelOutOfRange, "label");
      std::vector<double> p = head.probs(features[i]);
      Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(p.data(), C);
      d[labels[i]] -= 1.0;
      gw.noalias() += features[i] * d.transpose();
      gb += d;
    }
    head.weight -= lr * scale * gw;
    head.bias -= lr * scale * gb;
  }
  return head;
}

double head_entropy(const LinearHead& head, const std::vector<Eigen::VectorXd>& batch) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyInput, "empty batch");
  double total = 0.0;
  for (const auto& h : batch) total += entropy(head.probs(h));
  return total / static_cast<double>(batch.size());
}

LinearHead head_entropy_grad(const LinearHead& head, const std::vector<Eigen::VectorXd>& batch) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyInput, "empty batch");
  LinearHead g{Eigen::MatrixXd::Zero(head.weight.rows(), head.weight.cols()),
               Eigen::VectorXd::Zero(head.bias.size())};
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& h : batch) {
    Eigen::VectorXd ds = entropy_grad_scores(head.probs(h));
    g.weight.noalias() += scale * h * ds.transpose();
    g.bias += scale * ds;
  }
  return g;
}

Prediction FrozenLinear::predict(const Eigen::VectorXd& h) const {
  return from_probs(head_.probs(h));
}

PrototypeAdapter::PrototypeAdapter(const std::vector<Eigen::VectorXd>& features,
                                   const std::vector<ClassLabel>& labels,
                                   std::size_t num_classes, double tau, double margin)
    : counts_(num_classes, 0), tau_(tau), margin_(margin) {
  if (features.empty()) throw Error(ErrorCode::kEmptyInput, "no source features");
  if (!(tau > 0.0)) throw Error(ErrorCode::kBadParams, "prototype tau must be > 0");
  centroids_.assign(num_classes, Eigen::VectorXd::Zero(features[0].size()));
  for (std::size_t i = 0; i < features.size(); ++i) {
    centroids_[labels[i]] += features[i];
    ++counts_[labels[i]];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts_[c] == 0) throw Error(ErrorCode::kBadParams, "a class has no source samples");
    centroids_[c] /= static_cast<double>(counts_[c]);
  }
}

Prediction PrototypeAdapter::predict(const Eigen::VectorXd& h) const {
  std::vector<double> s(centroids_.size());
  for (std::size_t c = 0; c < s.size(); ++c) {
    s[c] = cosine_similarity(std::span<const double>(h.data(), static_cast<std::size_t>(h.size())),
                             std::span<const double>(centroids_[c].data(),
                                                     static_cast<std::size_t>(centroids_[c].size()))) /
           tau_;
  }
  return from_probs(softmax(s));
}

Prediction PrototypeAdapter::predict_adapt(const Eigen::VectorXd& h, std::uint32_t) {
  Prediction p = predict(h);
  if (p.confidence > margin_) {
    auto& n = counts_[p.label];
    centroids_[p.label] += (h - centroids_[p.label]) / static_cast<double>(n + 1);
    ++n;
  }
  return p;
}

Prediction EntropyHead::predict(const Eigen::VectorXd& h) const {
  return from_probs(head_.probs(h));
}

Prediction EntropyHead::predict_adapt(const Eigen::VectorXd& h, std::uint32_t) {
  Prediction p = predict(h);
  if (lr_ != 0.0) {
    LinearHead g = head_entropy_grad(head_, {h});
    head_.weight -= lr_ * g.weight;
    head_.bias -= lr_ * g.bias;
  }
  return p;
}

AdaNpcAdapter::AdaNpcAdapter(MemoryBank bank, AdaptConfig config)
    : bank_(std::move(bank)), config_(config) {
  config_.validate();
}

Prediction AdaNpcAdapter::predict_adapt(const Eigen::VectorXd& h, std::uint32_t domain_id) {
  return adapt_step(bank_, to_float(h), config_, domain_id).prediction;
}

Prediction AdaNpcAdapter::predict(const Eigen::VectorXd& h) const {
  return adanpc::predict(bank_, to_float(h), config_.k, config_.weighting);
}

AdaNpcBnAdapter::AdaNpcBnAdapter(MemoryBank bank, BnLayer layer, AdaptConfig config, double bn_lr)
    : bank_(std::move(bank)), layer_(std::move(layer)), config_(config), bn_lr_(bn_lr) {
  config_.validate();
}

Prediction AdaNpcBnAdapter::predict_adapt(const Eigen::VectorXd& h, std::uint32_t domain_id) {
  bn_forward_stream(layer_, h);
  if (bn_lr_ > 0.0) layer_ = bn_entropy_step(layer_, bank_, {h}, config_.k, bn_lr_).layer;
  return adapt_step(bank_, to_float(bn_forward_eval(layer_, h)), config_, domain_id).prediction;
}

Prediction AdaNpcBnAdapter::predict(const Eigen::VectorXd& h) const {
  return adanpc::predict(bank_, to_float(bn_forward_eval(layer_, h)), config_.k, config_.weighting);
}

std::unique_ptr<Adapter> make_adapter(const BaselineSpec& spec,
                                      const std::vector<Eigen::VectorXd>& features,
                                      const std::vector<ClassLabel>& labels,
                                      std::size_t num_classes) {
  if (features.empty()) throw Error(ErrorCode::kEmptyInput, "no source features");
  const double margin = spec.margin.value_or(default_margin(static_cast<std::uint32_t>(num_classes)));
  AdaptConfig cfg;
  cfg.k = spec.k;
  cfg.margin = margin;
  const auto dim = static_cast<std::size_t>(features[0].size());
  switch (spec.kind) {
    case BaselineKind::kFrozenLinear:
      return std::make_unique<FrozenLinear>(
          train_linear_head(features, labels, num_classes, spec.head_epochs, spec.head_lr));
    case BaselineKind::kEntropyHead:
      return std::make_unique<EntropyHead>(
          train_linear_head(features, labels, num_classes, spec.head_epochs, spec.head_lr),
          spec.entropy_lr);
    case BaselineKind::kPrototype:
      return std::make_unique<PrototypeAdapter>(features, labels, num_classes, spec.prototype_tau,
                                                margin);
    case BaselineKind::kAdaNpc: {
      MemoryBank bank(dim, static_cast<std::uint32_t>(num_classes));
      for (std::size_t i = 0; i < features.size(); ++i) {
        bank.insert(to_float(features[i]), labels[i], Provenance::source(0));
      }
      return std::make_unique<AdaNpcAdapter>(std::move(bank), cfg);
    }
    case BaselineKind::kAdaNpcBn: {
      // Running statistics start from the source batch.
      Eigen::MatrixXd batch(static_cast<Eigen::Index>(features.size()), static_cast<Eigen::Index>(dim));
      for (std::size_t i = 0; i < features.size(); ++i) {
        batch.row(static_cast<Eigen::Index>(i)) = features[i].transpose();
      }
      BnLayer layer = BnLayer::identity(dim, spec.bn_momentum);
      layer.running_mean = batch.colwise().mean().transpose();
      layer.running_var =
          (batch.rowwise() - layer.running_mean.transpose()).colwise().squaredNorm().transpose() /
          static_cast<double>(features.size());
      MemoryBank bank(dim, static_cast<std::uint32_t>(num_classes));
      for (std::size_t i = 0; i < features.size(); ++i) {
        bank.insert(to_float(bn_forward_eval(layer, features[i])), labels[i], Provenance::source(0));
      }
      return std::make_unique<AdaNpcBnAdapter>(std::move(bank), std::move(layer), cfg, spec.bn_lr);
    }
  }
  throw Error(ErrorCode::kBadParams, "unknown method");
}

// ---- successive adaptation ---------------------------------------------

namespace {

std::vector<MemoryEntry> source_entries(const MemoryBank& bank) {
  std::vector<MemoryEntry> out;
  for (std::size_t pos = 0; pos < bank.size(); ++pos) {
    if (!bank.provenance_at(pos).is_source()) continue;
    auto f = bank.feature_at(pos);
    out.push_back({bank.id_at(pos), {f.begin(), f.end()}, bank.label_at(pos), bank.provenance_at(pos)});
  }
  return out;
}

const MemoryBank* bank_of(const Adapter& a) {
  if (auto* p = dynamic_cast<const AdaNpcAdapter*>(&a)) return &p->bank();
  if (auto* p = dynamic_cast<const AdaNpcBnAdapter*>(&a)) return &p->bank();
  return nullptr;
}

}  // namespace

SuccessiveResult run_successive(const DomainSequence& sequence, const BaselineSpec& method,
                                const EncoderParams& encoder, std::uint64_t seed) {
  encoder.validate();
  if (sequence.domains.size() < 2) throw Error(ErrorCode::kBadParams, "need at least 2 domains");
  const std::size_t C = sequence.spec.n_classes;
  std::vector<Eigen::VectorXd> feats;
  std::vector<ClassLabel> labels;
  for (const Sample& s : sequence.domains[0]) {
    feats.push_back(encoder_forward(encoder, s.x));
    labels.push_back(s.y);
  }
  std::vector<Eigen::VectorXd> test_feats;
  for (const Sample& s : sequence.source_test) test_feats.push_back(encoder_forward(encoder, s.x));

  std::unique_ptr<Adapter> adapter = make_adapter(method, feats, labels, C);
  auto source_accuracy = [&] {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < test_feats.size(); ++i) {
      if (adapter->predict(test_feats[i]).label == sequence.source_test[i].y) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(test_feats.size());
  };

  SuccessiveResult result;
  std::vector<MemoryEntry> before;
  if (const MemoryBank* bank = bank_of(*adapter)) {
    before = source_entries(*bank);
    result.source_entries_before = before.size();
  }
  const double initial = source_accuracy();
  result.rows.push_back({0, initial, initial});

  std::mt19937_64 rng(seed);
  for (std::size_t d = 1; d < sequence.domains.size(); ++d) {
    const Dataset& domain = sequence.domains[d];
    std::vector<std::size_t> order(domain.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t ok = 0;
    for (std::size_t i : order) {
      Prediction p = adapter->predict_adapt(encoder_forward(encoder, domain[i].x),
                                            static_cast<std::uint32_t>(d));
      if (p.label == domain[i].y) ++ok;
    }
    result.rows.push_back(
        {d, static_cast<double>(ok) / static_cast<double>(domain.size()), source_accuracy()});
  }

  if (const MemoryBank* bank = bank_of(*adapter)) {
    auto after = source_entries(*bank);
    result.source_entries_after = after.size();
    result.source_entries_unchanged = after == before;
    result.bank_size_after = bank->size();
  }
  return result;
}

void write_successive_csv(std::ostream& out,
                          const std::vector<std::pair<std::uint64_t, SuccessiveResult>>& runs) {
  out << "# domain_index 0 is the source before adaptation; source_accuracy is measured on the"
         " held-out d0 split after each domain\n";
  out << "seed,domain_index,during_accuracy,source_accuracy\n";
  char buf[64];
  for (const auto& [seed, r] : runs) {
    for (const auto& row : r.rows) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g", row.during_accuracy, row.source_accuracy);
      out << seed << ',' << row.domain_index << ',' << buf << '\n';
    }
  }
}

// ---- inference benchmark -----------------------------------------------

std::vector<float> make_clustered_features(std::size_t n, std::size_t dim,
                                           std::size_t components, double spread,
                                           std::uint64_t seed) {
  if (dim == 0 || components == 0) throw Error(ErrorCode::kBadParams, "dim and components");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> centers(components * dim);
  for (std::size_t c = 0; c < components; ++c) {
    double norm = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      centers[c * dim + j] = g(rng);
      norm += centers[c * dim + j] * centers[c * dim + j];
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < dim; ++j) centers[c * dim + j] /= norm;
  }
  std::uniform_int_distribution<std::size_t> pick(0, components - 1);
  const double noise = spread / std::sqrt(static_cast<double>(dim));
  std::vector<float> out(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = pick(rng);
    for (std::size_t j = 0; j < dim; ++j) {
      out[i * dim + j] = static_cast<float>(centers[c * dim + j] + noise * g(rng));
    }
  }
  return out;
}

namespace {

struct Timing {
  double p50_us = 0.0;
  double p95_us = 0.0;
  double qps = 0.0;
};

Timing summarize(std::vector<double> us) {
  Timing t;
  const double total = std::accumulate(us.begin(), us.end(), 0.0);
  std::sort(us.begin(), us.end());
  auto pct = [&](double q) {
    auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(us.size()))) - 1;
    return us[std::min(idx, us.size() - 1)];
  };
  t.p50_us = pct(0.50);
  t.p95_us = pct(0.95);
  t.qps = total > 0.0 ? 1e6 * static_cast<double>(us.size()) / total : 0.0;
  return t;
}

template <typename F>
std::vector<double> time_queries(std::size_t n, F&& f) {
  std::vector<double> us(n);
  for (std::size_t q = 0; q < n; ++q) {
    auto t0 = std::chrono::steady_clock::now();
    f(q);
    auto t1 = std::chrono::steady_clock::now();
    us[q] = std::chrono::duration<double, std::micro>(t1 - t0).count();
  }
  return us;
}

}  // namespace

std::vector<BenchRow> bench_inference(const BenchConfig& config) {
  if (config.sizes.empty()) throw Error(ErrorCode::kBadParams, "no bank sizes");
  if (config.k == 0 || config.n_queries == 0 || config.dim == 0) {
    throw Error(ErrorCode::kBadParams, "k, dim and n_queries must be >= 1");
  }
  std::vector<BenchRow> rows;
  for (std::size_t n : config.sizes) {
    if (n == 0) throw Error(ErrorCode::kBadParams, "bank size must be >= 1");
    const std::size_t comps =
        config.mixture_components ? config.mixture_components : std::max<std::size_t>(10, n / 1000);
    // Bank and queries come from one draw of the same mixture.
    std::vector<float> data = make_clustered_features(n + config.n_queries, config.dim, comps,
                                                      config.spread, config.seed ^ n);
    MemoryBank bank(config.dim, 1);
    for (std::size_t i = 0; i < n; ++i) {
      bank.insert(std::span<const float>(data.data() + i * config.dim, config.dim), 0,
                  Provenance::source(0));
    }
    auto query = [&](std::size_t q) {
      return std::span<const float>(data.data() + (n + q) * config.dim, config.dim);
    };

    std::vector<NeighborSet> exact(config.n_queries);
    Timing te = summarize(time_queries(config.n_queries,
                                       [&](std::size_t q) { exact[q] = bank.knn_exact(query(q), config.k); }));
    rows.push_back({"exact", n, te.p50_us, te.p95_us, te.qps, 1.0, 0, 0, true});

    std::size_t nc = config.n_clusters
                         ? config.n_clusters
                         : std::max<std::size_t>(16, static_cast<std::size_t>(std::lround(std::sqrt(n))));
    nc = std::min(nc, n);
    const std::size_t nprobe = config.nprobe ? std::min(config.nprobe, nc) : std::max<std::size_t>(1, nc / 16);
    IvfBuildOptions opts;
    opts.n_clusters = nc;
    opts.seed = config.seed;
    opts.iterations = config.ivf_iterations;
    opts.max_train_points = config.train_per_cluster * nc;
    bank.build_ivf(opts);

    bool gate = true;
    for (std::size_t q = 0; q < config.n_queries; ++q) {
      if (bank.knn_ivf(query(q), config.k, nc) != exact[q]) gate = false;
    }
    std::vector<NeighborSet> approx(config.n_queries);
    Timing ti = summarize(time_queries(
        config.n_queries, [&](std::size_t q) { approx[q] = bank.knn_ivf(query(q), config.k, nprobe); }));
    std::size_t hits = 0, total = 0;
    for (std::size_t q = 0; q < config.n_queries; ++q) {
      for (const Neighbor& e : exact[q]) {
        ++total;
        for (const Neighbor& a : approx[q]) {
          if (a.id == e.id) {
            ++hits;
            break;
          }
        }
      }
    }
    const double recall = total ? static_cast<double>(hits) / static_cast<double>(total) : 1.0;
    rows.push_back({"ivf", n, ti.p50_us, ti.p95_us, ti.qps, recall, nc, nprobe, gate});
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "# latencies are per single-threaded query; recall_at_k is measured against exact;"
         " gate_ok checks ivf at nprobe = n_clusters against exact\n";
  out << "variant,bank_size,p50_us,p95_us,qps,recall_at_k,n_clusters,nprobe,gate_ok\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.3f,%.3f,%.1f,%.4f", r.p50_us, r.p95_us, r.qps, r.recall);
    out << r.variant << ',' << r.bank_size << ',' << buf << ',' << r.n_clusters << ','
        << r.nprobe << ',' << (r.gate_ok ? 1 : 0) << '\n';
  }
}

}  // namespace adanpc::harness
