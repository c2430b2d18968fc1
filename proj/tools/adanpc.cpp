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

// adanpc command-line entry point.
//
// Every failure prints exactly one line, "error: <Name>: <message>", to
// stderr and exits nonzero.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "adanpc/bn_adapt.hpp"
#include "adanpc/classifier.hpp"
#include "adanpc/encoder.hpp"
#include "adanpc/error.hpp"
#include "adanpc/harness.hpp"
#include "adanpc/service.hpp"
#include "adanpc/snapshot.hpp"
#include "adanpc/theory_lab.hpp"
#include "adanpc/trainer.hpp"

namespace {

using adanpc::Error;
using adanpc::ErrorCode;
using nlohmann::json;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBadParams, path + ": " + e.what());
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  return out;
}

// "1,2,5-8" -> {1, 2, 5, 6, 7, 8}
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      auto dash = item.find('-', 1);
      if (dash == std::string::npos) {
        out.push_back(std::stoull(item));
      } else {
        std::uint64_t lo = std::stoull(item.substr(0, dash));
        std::uint64_t hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw Error(ErrorCode::kBadParams, "empty seed range " + item);
        for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kBadParams, "bad seed list '" + text + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::kBadParams, "no seeds given");
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  for (std::uint64_t v : parse_seeds(text)) out.push_back(static_cast<std::size_t>(v));
  return out;
}

// label,domain,x0,x1,...; '#' lines and a "label" header are skipped.
adanpc::Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  adanpc::Dataset out;
  std::string line;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("label", 0) == 0) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::kBadParams, path + ": bad number '" + cell + "'");
      }
    }
    if (values.size() < 3) throw Error(ErrorCode::kBadParams, path + ": need label,domain,x...");
    if (dim == 0) dim = values.size() - 2;
    if (values.size() - 2 != dim) throw Error(ErrorCode::kDimMismatch, path + ": ragged rows");
    adanpc::Sample s;
    s.y = static_cast<adanpc::ClassLabel>(values[0]);
    s.domain = static_cast<std::uint32_t>(values[1]);
    s.x = Eigen::Map<Eigen::VectorXd>(values.data() + 2, static_cast<Eigen::Index>(dim));
    out.push_back(std::move(s));
  }
  if (out.empty()) throw Error(ErrorCode::kEmptyInput, path + " has no samples");
  return out;
}

adanpc::Dataset dataset_from_config(const json& data, std::uint64_t seed) {
  std::string kind = data.value("kind", "rotated");
  if (kind == "csv") return read_dataset_csv(data.at("path").get<std::string>());
  if (kind != "rotated") throw Error(ErrorCode::kBadParams, "data.kind must be rotated or csv");
  auto spec = data.get<adanpc::harness::RotatedSequenceSpec>();
  if (!data.contains("seed")) spec.seed = seed;
  auto seq = adanpc::harness::make_rotated_sequence(spec);
  std::vector<std::size_t> domains = data.value("domains", std::vector<std::size_t>{0});
  adanpc::Dataset out;
  for (std::size_t d : domains) {
    if (d >= seq.domains.size()) throw Error(ErrorCode::kBadParams, "domain index out of range");
    out.insert(out.end(), seq.domains[d].begin(), seq.domains[d].end());
  }
  return out;
}

adanpc::EncoderParams load_encoder(const std::string& path) {
  json j = read_json(path);
  return adanpc::encoder_from_json(j.contains("encoder") ? j.at("encoder") : j);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- subcommands -------------------------------------------------------

struct TrainArgs {
  std::string config, out, trace;
};

int run_train(const TrainArgs& a) {
  json cfg = read_json(a.config);
  const std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
  adanpc::Dataset data = dataset_from_config(cfg.value("data", json::object()), seed);
  auto loss = cfg.value("loss", json::object()).get<adanpc::KnnLossConfig>();
  std::vector<std::size_t> dims = cfg.value("encoder_dims", std::vector<std::size_t>{});
  if (dims.empty()) dims = {static_cast<std::size_t>(data[0].x.size()), 16, 8};
  if (dims.front() != static_cast<std::size_t>(data[0].x.size())) {
    throw Error(ErrorCode::kDimMismatch, "encoder_dims[0] differs from the data dimension");
  }
  adanpc::EncoderParams init = adanpc::make_encoder(dims, seed);
  adanpc::TrainResult result = adanpc::train(init, data, loss, seed);
  const double acc = adanpc::knn_training_accuracy(result.params, data, loss.k);

  json out = {{"encoder", adanpc::encoder_to_json(result.params)},
              {"loss", loss},
              {"seed", seed},
              {"final_loss", result.loss_trace.empty() ? 0.0 : result.loss_trace.back()},
              {"knn_training_accuracy", acc}};
  open_out(a.out) << out.dump(2) << '\n';
  if (!a.trace.empty()) {
    auto t = open_out(a.trace);
    t << "# KNN loss of each training step, computed before that step's update\n";
    t << "step,loss\n";
    for (std::size_t i = 0; i < result.loss_trace.size(); ++i) {
      t << i + 1 << ',' << fmt(result.loss_trace[i]) << '\n';
    }
  }
  std::cout << "trained " << result.loss_trace.size() << " steps, final loss "
            << fmt(out["final_loss"].get<double>()) << ", knn accuracy " << fmt(acc) << '\n';
  return 0;
}

struct AdaptArgs {
  std::string bank, stream, report, out_bank;
  std::size_t k = adanpc::kDefaultK;
  double margin = -1.0;
  bool bn = false;
  double bn_lr = 0.1;
  double bn_momentum = 0.1;
};

int run_adapt(const AdaptArgs& a) {
  adanpc::MemoryBank bank = adanpc::snapshot_load(a.bank);
  adanpc::MemoryBank stream = adanpc::snapshot_load(a.stream);
  if (bank.empty()) throw Error(ErrorCode::kEmptyBank, a.bank + " has no entries");
  if (stream.dim() != bank.dim()) throw Error(ErrorCode::kDimMismatch, "bank and stream dims differ");
  adanpc::AdaptConfig cfg;
  cfg.k = a.k;
  cfg.margin = a.margin < 0.0 ? adanpc::default_margin(bank.num_classes()) : a.margin;
  cfg.validate();
  adanpc::BnLayer layer = adanpc::BnLayer::identity(bank.dim(), a.bn_momentum);
  if (a.bn && !(a.bn_momentum > 0.0 && a.bn_momentum <= 1.0)) {
    throw Error(ErrorCode::kBadParams, "bn-momentum must be in (0, 1]");
  }

  auto report = open_out(a.report);
  report << "# one row per stream sample in pack order; prediction is made before insertion\n";
  report << "index,true_label,pred_label,confidence,inserted,bank_size";
  if (a.bn) report << ",entropy_before,entropy_after";
  report << '\n';
  std::size_t correct = 0;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    auto f = stream.feature_at(i);
    std::vector<float> query(f.begin(), f.end());
    std::string extra;
    if (a.bn) {
      Eigen::VectorXd x = adanpc::to_double(query);
      adanpc::bn_forward_stream(layer, x);
      adanpc::BnEntropyStep step = adanpc::bn_entropy_step(layer, bank, {x}, cfg.k, a.bn_lr);
      layer = step.layer;
      query = adanpc::to_float(adanpc::bn_forward_eval(layer, x));
      extra = "," + fmt(step.entropy_before) + "," + fmt(step.entropy_after);
    }
    adanpc::AdaptResult r =
        adanpc::adapt_step(bank, query, cfg, stream.provenance_at(i).domain_id);
    if (r.prediction.label == stream.label_at(i)) ++correct;
    report << i << ',' << stream.label_at(i) << ',' << r.prediction.label << ','
           << fmt(r.prediction.confidence) << ',' << (r.inserted ? 1 : 0) << ',' << bank.size()
           << extra << '\n';
  }
  if (!a.out_bank.empty()) adanpc::snapshot_save(bank, a.out_bank, {{"source", a.bank}});
  std::cout << "adapted " << stream.size() << " samples, accuracy "
            << fmt(stream.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(stream.size()))
            << ", bank size " << bank.size() << '\n';
  return 0;
}

struct SuccessiveArgs {
  std::string sequence, method, seeds, report, encoder;
};

int run_successive_cmd(const SuccessiveArgs& a) {
  json cfg = read_json(a.sequence);
  auto spec = adanpc::harness::baseline_from_json(a.method, cfg.value("method_params", json::object()));
  json seq_cfg = cfg;
  seq_cfg.erase("method_params");
  std::vector<std::pair<std::uint64_t, adanpc::harness::SuccessiveResult>> runs;
  for (std::uint64_t seed : parse_seeds(a.seeds)) {
    auto seq_spec = seq_cfg.get<adanpc::harness::RotatedSequenceSpec>();
    seq_spec.seed = seed;
    auto seq = adanpc::harness::make_rotated_sequence(seq_spec);
    adanpc::EncoderParams enc =
        a.encoder.empty() ? adanpc::identity_encoder(seq_spec.dim()) : load_encoder(a.encoder);
    runs.emplace_back(seed, adanpc::harness::run_successive(seq, spec, enc, seed));
  }
  auto out = open_out(a.report);
  adanpc::harness::write_successive_csv(out, runs);
  double final_acc = 0.0;
  for (const auto& [s, r] : runs) final_acc += r.rows.back().during_accuracy;
  std::cout << a.method << ": mean final-domain accuracy "
            << fmt(final_acc / static_cast<double>(runs.size())) << " over " << runs.size()
            << " seeds\n";
  return 0;
}

struct TheoryArgs {
  std::string experiment, grid, seeds, report;
};

int run_theory(const TheoryArgs& a) {
  auto exp = adanpc::theory::parse_experiment(a.experiment);
  if (!exp) throw Error(ErrorCode::kBadParams, "experiment must be prop1, prop2 or prop3");
  auto report = adanpc::theory::run_experiment(*exp, read_json(a.grid), parse_seeds(a.seeds));
  auto out = open_out(a.report);
  adanpc::theory::write_report_csv(out, report);
  std::cout << a.experiment << ": " << report.cells.size() << " cells in "
            << fmt(report.runtime.count()) << " s\n";
  return 0;
}

struct BenchArgs {
  std::string sizes, report;
  adanpc::harness::BenchConfig config;
};

int run_bench(BenchArgs a) {
  a.config.sizes = parse_sizes(a.sizes);
  auto rows = adanpc::harness::bench_inference(a.config);
  auto out = open_out(a.report);
  adanpc::harness::write_bench_csv(out, rows);
  adanpc::harness::write_bench_csv(std::cout, rows);
  for (const auto& r : rows) {
    if (!r.gate_ok) {
      throw Error(ErrorCode::kIndexStale,
                  "ivf with nprobe = n_clusters disagreed with exact search at bank size " +
                      std::to_string(r.bank_size));
    }
  }
  return 0;
}

struct ServeArgs {
  std::string bank, addr;
  bool readonly = false;
  std::size_t k = adanpc::kDefaultK;
  double margin = -1.0;
};

int run_serve(const ServeArgs& a) {
  adanpc::MemoryBank bank = adanpc::snapshot_load(a.bank);
  std::string addr = a.addr;
  if (addr.empty()) {
    const char* env = std::getenv("ADANPC_ADDR");
    addr = env ? env : "127.0.0.1:8080";
  }
  auto [host, port] = adanpc::service::parse_address(addr);
  adanpc::service::ServiceConfig cfg;
  cfg.adapt.k = a.k;
  cfg.adapt.margin = a.margin < 0.0 ? adanpc::default_margin(bank.num_classes()) : a.margin;
  cfg.readonly = a.readonly;
  adanpc::service::AdaptService svc(std::move(bank), cfg);
  adanpc::service::HttpServer server(svc);
  int bound = server.bind(host, port);
  std::cout << "listening on " << host << ':' << bound << (a.readonly ? " (read-only)" : "")
            << std::endl;
  server.listen();
  return 0;
}

struct PackArgs {
  std::string sequence, out, split = "train", encoder;
  std::size_t domain = 0;
  std::uint64_t seed = 0;
  bool empty = false;
  std::size_t dim = 2;
  std::uint32_t classes = 2;
};

int run_pack(const PackArgs& a) {
  if (a.empty) {
    adanpc::MemoryBank bank(a.dim, a.classes);
    adanpc::snapshot_save(bank, a.out, {{"kind", "empty"}});
    return 0;
  }
  if (a.sequence.empty()) throw Error(ErrorCode::kBadParams, "--sequence or --empty is required");
  json cfg = read_json(a.sequence);
  cfg.erase("method_params");
  auto spec = cfg.get<adanpc::harness::RotatedSequenceSpec>();
  spec.seed = a.seed;
  auto seq = adanpc::harness::make_rotated_sequence(spec);
  if (a.domain >= seq.domains.size()) throw Error(ErrorCode::kBadParams, "domain out of range");
  if (a.split != "train" && a.split != "test") throw Error(ErrorCode::kBadParams, "split");
  if (a.split == "test" && a.domain != 0) {
    throw Error(ErrorCode::kBadParams, "only domain 0 has a held-out test split");
  }
  const adanpc::Dataset& data = a.split == "test" ? seq.source_test : seq.domains[a.domain];
  adanpc::EncoderParams enc =
      a.encoder.empty() ? adanpc::identity_encoder(spec.dim()) : load_encoder(a.encoder);
  adanpc::MemoryBank bank(enc.feature_dim(), static_cast<std::uint32_t>(spec.n_classes));
  for (const auto& s : data) {
    bank.insert(adanpc::to_float(adanpc::encoder_forward(enc, s.x)), s.y,
                adanpc::Provenance::source(s.domain));
  }
  json meta = {{"sequence", spec}, {"domain", a.domain}, {"split", a.split}};
  adanpc::snapshot_save(bank, a.out, meta);
  std::cout << "packed " << bank.size() << " entries into " << a.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adanpc: nearest-neighbor test-time adaptation toolkit"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train an encoder with the KNN loss");
  c_train->add_option("--config", train.config, "Training config JSON")->required();
  c_train->add_option("--out", train.out, "Output params JSON")->required();
  c_train->add_option("--trace", train.trace, "Per-step loss CSV");

  AdaptArgs adapt;
  auto* c_adapt = app.add_subcommand("adapt", "Stream a pack through the adaptive classifier");
  c_adapt->add_option("--bank", adapt.bank, "Memory bank pack")->required();
  c_adapt->add_option("--stream", adapt.stream, "Stream pack (labels used for scoring)")->required();
  c_adapt->add_option("--k", adapt.k, "Neighbors");
  c_adapt->add_option("--margin", adapt.margin, "Confidence gate (default depends on classes)");
  c_adapt->add_flag("--bn-adapt", adapt.bn, "Entropy-adapt one BN layer per sample");
  c_adapt->add_option("--bn-lr", adapt.bn_lr, "BN entropy step size");
  c_adapt->add_option("--bn-momentum", adapt.bn_momentum, "BN running-stat momentum");
  c_adapt->add_option("--report", adapt.report, "Per-sample CSV")->required();
  c_adapt->add_option("--out-bank", adapt.out_bank, "Write the adapted bank here");

  SuccessiveArgs succ;
  auto* c_succ = app.add_subcommand("successive", "Successive adaptation over rotated domains");
  c_succ->add_option("--sequence", succ.sequence, "Sequence JSON")->required();
  c_succ->add_option("--method", succ.method,
                     "frozen_linear | prototype | entropy_head | adanpc | adanpc_bn")
      ->required();
  c_succ->add_option("--seeds", succ.seeds, "Seed list, e.g. 1,2,5-9")->required();
  c_succ->add_option("--report", succ.report, "Trace CSV")->required();
  c_succ->add_option("--encoder", succ.encoder, "Params JSON from train (default identity)");

  TheoryArgs theory;
  auto* c_theory = app.add_subcommand("theory", "Run a synthetic bound experiment");
  c_theory->add_option("experiment", theory.experiment, "prop1 | prop2 | prop3")->required();
  c_theory->add_option("--grid", theory.grid, "Grid JSON")->required();
  c_theory->add_option("--seeds", theory.seeds, "Seed list")->required();
  c_theory->add_option("--report", theory.report, "Report CSV")->required();

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Time exact and IVF neighbor search");
  c_bench->add_option("--sizes", bench.sizes, "Bank sizes, e.g. 10000,100000")->required();
  c_bench->add_option("--dim", bench.config.dim, "Feature dimension");
  c_bench->add_option("--k", bench.config.k, "Neighbors");
  c_bench->add_option("--report", bench.report, "Report CSV")->required();
  c_bench->add_option("--queries", bench.config.n_queries, "Queries per bank size");
  c_bench->add_option("--clusters", bench.config.n_clusters, "IVF lists (0: sqrt(n))");
  c_bench->add_option("--nprobe", bench.config.nprobe, "Lists probed (0: clusters / 16)");
  c_bench->add_option("--seed", bench.config.seed, "Data seed");

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Serve the /v1 JSON API");
  c_serve->add_option("--bank", serve.bank, "Memory bank pack")->required();
  c_serve->add_option("--addr", serve.addr, "host:port (default $ADANPC_ADDR or 127.0.0.1:8080)");
  c_serve->add_flag("--readonly", serve.readonly, "Reject commit and adapt with 403");
  c_serve->add_option("--k", serve.k, "Default neighbors");
  c_serve->add_option("--margin", serve.margin, "Confidence gate");

  PackArgs pack;
  auto* c_pack = app.add_subcommand("pack", "Write a feature pack from a rotated sequence");
  c_pack->add_option("--sequence", pack.sequence, "Sequence JSON");
  c_pack->add_option("--domain", pack.domain, "Domain index");
  c_pack->add_option("--split", pack.split, "train | test (test: held-out d0)");
  c_pack->add_option("--seed", pack.seed, "Sequence seed");
  c_pack->add_option("--encoder", pack.encoder, "Params JSON from train (default identity)");
  c_pack->add_flag("--empty", pack.empty, "Write an empty pack");
  c_pack->add_option("--dim", pack.dim, "Dimension of an empty pack");
  c_pack->add_option("--classes", pack.classes, "Classes of an empty pack");
  c_pack->add_option("--out", pack.out, "Output pack")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: BadParams: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*c_train) return run_train(train);
    if (*c_adapt) return run_adapt(adapt);
    if (*c_succ) return run_successive_cmd(succ);
    if (*c_theory) return run_theory(theory);
    if (*c_bench) return run_bench(bench);
    if (*c_serve) return run_serve(serve);
    if (*c_pack) return run_pack(pack);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: BadParams: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
