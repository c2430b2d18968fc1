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

#include "adanpc/service.hpp"

#include <charconv>
#include <thread>

#include <httplib.h>

#include "adanpc/error.hpp"

namespace adanpc::service {

namespace {

using nlohmann::json;

Response error_response(int status, std::string_view name, const std::string& message) {
  return {status, {{"error", name}, {"message", message}}};
}

Response from_error(const Error& e) {
  int status = 400;
  if (e.code() == ErrorCode::kUnknownEntry) status = 404;
  std::string what = e.what();
  auto colon = what.find(": ");
  return error_response(status, error_name(e.code()),
                        colon == std::string::npos ? what : what.substr(colon + 2));
}

std::vector<float> parse_feature(const json& body, std::size_t dim) {
  if (!body.contains("feature") || !body.at("feature").is_array()) {
    throw Error(ErrorCode::kBadParams, "'feature' must be an array of numbers");
  }
  std::vector<float> f;
  for (const auto& v : body.at("feature")) {
    if (!v.is_number()) throw Error(ErrorCode::kBadParams, "'feature' must be an array of numbers");
    f.push_back(v.get<float>());
  }
  if (f.size() != dim) {
    throw Error(ErrorCode::kDimMismatch,
                "feature has " + std::to_string(f.size()) + " values, bank dim is " + std::to_string(dim));
  }
  return f;
}

std::string query_id_of(const json& body) {
  if (!body.contains("query_id") || !body.at("query_id").is_string()) {
    throw Error(ErrorCode::kBadParams, "'query_id' must be a string");
  }
  return body.at("query_id").get<std::string>();
}

std::size_t k_of(const json& body, std::size_t fallback) {
  if (!body.contains("k")) return fallback;
  auto k = body.at("k").get<std::int64_t>();
  if (k < 1) throw Error(ErrorCode::kBadParams, "k must be >= 1");
  return static_cast<std::size_t>(k);
}

Response not_found_query(const std::string& id) {
  return error_response(404, "UnknownQuery", "no query '" + id + "'");
}

}  // namespace

json provenance_json(const Provenance& p) {
  if (p.is_source()) return {{"kind", "source"}, {"domain_id", p.domain_id}};
  return {{"kind", "target"}, {"domain_id", p.domain_id}, {"confidence", p.confidence}};
}

AdaptService::AdaptService(MemoryBank bank, ServiceConfig config)
    : config_(config), bank_(std::move(bank)) {
  config_.adapt.validate();
}

MemoryBank AdaptService::bank_copy() const {
  std::shared_lock lock(bank_mutex_);
  return bank_;
}

json AdaptService::prediction_json(const std::string& query_id, const QueryState& q) const {
  json neighbors = json::array();
  for (const Neighbor& n : q.prediction.neighbors) {
    std::size_t pos = *bank_.position(n.id);
    neighbors.push_back({{"entry_id", n.id},
                         {"similarity", n.similarity},
                         {"label", bank_.label_at(pos)},
                         {"provenance", provenance_json(bank_.provenance_at(pos))}});
  }
  return {{"query_id", query_id},
          {"label", q.prediction.label},
          {"confidence", q.prediction.confidence},
          {"probs", q.prediction.probs},
          {"neighbors", std::move(neighbors)},
          {"excluded", q.excluded_order}};
}

void AdaptService::record(const std::string& endpoint, const json& request, int status) {
  audit_.push_back({{"seq", audit_.size()},
                    {"endpoint", endpoint},
                    {"request", request},
                    {"status", status}});
}

Response AdaptService::predict(const json& body) {
  std::shared_lock bank_lock(bank_mutex_);
  Response r;
  QueryState q;
  try {
    q.feature = parse_feature(body, bank_.dim());
    q.k = k_of(body, config_.adapt.k);
    q.domain_id = body.value("domain_id", 0u);
    q.prediction = adanpc::predict(bank_, q.feature, q.k, config_.adapt.weighting);
    q.bank_version = bank_.version();
  } catch (const Error& e) {
    r = from_error(e);
  } catch (const json::exception& e) {
    r = error_response(400, "BadParams", e.what());
  }
  std::lock_guard lock(state_mutex_);
  if (r.status == 200) {
    std::string id = "q" + std::to_string(next_query_++);
    r.body = prediction_json(id, q);
    queries_.emplace(id, std::move(q));
  }
  record("/v1/predict", body, r.status);
  return r;
}

Response AdaptService::curate(const json& body) {
  std::shared_lock bank_lock(bank_mutex_);
  std::lock_guard lock(state_mutex_);
  Response r;
  try {
    std::string id = query_id_of(body);
    auto it = queries_.find(id);
    if (it == queries_.end()) {
      r = not_found_query(id);
    } else {
      if (!body.contains("exclude") || !body.at("exclude").is_array()) {
        throw Error(ErrorCode::kBadParams, "'exclude' must be an array of entry ids");
      }
      QueryState next = it->second;
      for (const auto& v : body.at("exclude")) {
        auto eid = v.get<EntryId>();
        if (!bank_.contains(eid)) {
          throw Error(ErrorCode::kUnknownEntry, "no entry " + std::to_string(eid));
        }
        if (next.excluded.insert(eid).second) next.excluded_order.push_back(eid);
      }
      next.prediction = predict_excluding(bank_, next.feature, next.k, next.excluded,
                                          config_.adapt.weighting);
      next.bank_version = bank_.version();
      it->second = std::move(next);
      r.body = prediction_json(id, it->second);
    }
  } catch (const Error& e) {
    r = from_error(e);
  } catch (const json::exception& e) {
    r = error_response(400, "BadParams", e.what());
  }
  record("/v1/curate", body, r.status);
  return r;
}

Response AdaptService::curate_clear(const json& body) {
  std::shared_lock bank_lock(bank_mutex_);
  std::lock_guard lock(state_mutex_);
  Response r;
  try {
    std::string id = query_id_of(body);
    auto it = queries_.find(id);
    if (it == queries_.end()) {
      r = not_found_query(id);
    } else {
      QueryState& q = it->second;
      q.excluded.clear();
      q.excluded_order.clear();
      q.prediction = adanpc::predict(bank_, q.feature, q.k, config_.adapt.weighting);
      q.bank_version = bank_.version();
      r.body = prediction_json(id, q);
    }
  } catch (const Error& e) {
    r = from_error(e);
  } catch (const json::exception& e) {
    r = error_response(400, "BadParams", e.what());
  }
  record("/v1/curate/clear", body, r.status);
  return r;
}

Response AdaptService::commit(const json& body) {
  if (config_.readonly) return error_response(403, "ReadOnly", "service is read-only");
  std::unique_lock bank_lock(bank_mutex_);
  std::lock_guard lock(state_mutex_);
  Response r;
  try {
    std::string id = query_id_of(body);
    auto it = queries_.find(id);
    if (it == queries_.end()) {
      r = not_found_query(id);
    } else if (it->second.bank_version != bank_.version()) {
      r = error_response(409, "StaleQuery", "the bank changed after this prediction; re-predict");
    } else {
      const QueryState& q = it->second;
      if (q.prediction.confidence > config_.adapt.margin) {
        EntryId eid = bank_.insert(
            q.feature, q.prediction.label,
            Provenance::target(static_cast<float>(q.prediction.confidence), q.domain_id));
        r.body = {{"inserted", true}, {"entry_id", eid}};
      } else {
        r.body = {{"inserted", false}};
      }
      r.body["margin"] = config_.adapt.margin;
    }
  } catch (const Error& e) {
    r = from_error(e);
  } catch (const json::exception& e) {
    r = error_response(400, "BadParams", e.what());
  }
  record("/v1/commit", body, r.status);
  return r;
}

Response AdaptService::adapt(const json& body) {
  if (config_.readonly) return error_response(403, "ReadOnly", "service is read-only");
  std::unique_lock bank_lock(bank_mutex_);
  std::lock_guard lock(state_mutex_);
  Response r;
  try {
    std::vector<float> f = parse_feature(body, bank_.dim());
    AdaptConfig cfg = config_.adapt;
    cfg.k = k_of(body, cfg.k);
    AdaptResult res = adapt_step(bank_, f, cfg, body.value("domain_id", 0u));
    QueryState q;
    q.prediction = res.prediction;
    r.body = prediction_json("", q);
    r.body.erase("query_id");
    r.body.erase("excluded");
    r.body["inserted"] = res.inserted;
    if (res.entry_id) r.body["entry_id"] = *res.entry_id;
  } catch (const Error& e) {
    r = from_error(e);
  } catch (const json::exception& e) {
    r = error_response(400, "BadParams", e.what());
  }
  record("/v1/adapt", body, r.status);
  return r;
}

Response AdaptService::stats() const {
  std::shared_lock bank_lock(bank_mutex_);
  return {200,
          {{"size", bank_.size()},
           {"source_count", bank_.source_count()},
           {"target_count", bank_.target_count()},
           {"dim", bank_.dim()},
           {"classes", bank_.num_classes()},
           {"version", bank_.version()}}};
}

Response AdaptService::entry(EntryId id, bool include_feature) const {
  std::shared_lock bank_lock(bank_mutex_);
  auto pos = bank_.position(id);
  if (!pos) return error_response(404, "UnknownEntry", "no entry " + std::to_string(id));
  json body = {{"entry_id", id},
               {"label", bank_.label_at(*pos)},
               {"provenance", provenance_json(bank_.provenance_at(*pos))}};
  if (include_feature) {
    auto f = bank_.feature_at(*pos);
    body["feature"] = std::vector<float>(f.begin(), f.end());
  }
  return {200, body};
}

Response AdaptService::audit() const {
  std::lock_guard lock(state_mutex_);
  return {200, {{"events", audit_}}};
}

Response AdaptService::handle(const std::string& method, const std::string& path,
                              const std::string& body, const QueryParams& params) {
  static const std::string kEntries = "/v1/entries/";
  if (method == "GET") {
    if (path == "/v1/memory/stats") return stats();
    if (path == "/v1/audit") return audit();
    if (path.starts_with(kEntries)) {
      std::string_view digits = std::string_view(path).substr(kEntries.size());
      EntryId id = 0;
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), id);
      if (ec != std::errc() || ptr != digits.data() + digits.size() || digits.empty()) {
        return error_response(404, "UnknownEntry", "bad entry id '" + std::string(digits) + "'");
      }
      auto it = params.find("include_feature");
      bool include = it != params.end() && (it->second == "1" || it->second == "true");
      return entry(id, include);
    }
    return error_response(404, "NotFound", "no route " + path);
  }
  if (method != "POST") return error_response(405, "MethodNotAllowed", method);
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::exception& e) {
    return error_response(400, "BadParams", std::string("malformed JSON body: ") + e.what());
  }
  if (!parsed.is_object()) return error_response(400, "BadParams", "body must be a JSON object");
  if (path == "/v1/predict") return predict(parsed);
  if (path == "/v1/curate") return curate(parsed);
  if (path == "/v1/curate/clear") return curate_clear(parsed);
  if (path == "/v1/commit") return commit(parsed);
  if (path == "/v1/adapt") return adapt(parsed);
  return error_response(404, "NotFound", "no route " + path);
}

MemoryBank replay_audit(MemoryBank initial, const json& events, const ServiceConfig& config) {
  AdaptService svc(std::move(initial), config);
  for (const auto& ev : events) {
    svc.handle("POST", ev.at("endpoint").get<std::string>(), ev.at("request").dump());
  }
  return svc.bank_copy();
}

HttpServer::HttpServer(AdaptService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    QueryParams params(req.params.begin(), req.params.end());
    Response r = service_.handle(req.method, req.path, req.body, params);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server_->Get(R"(/v1/.*)", route);
  server_->Post(R"(/v1/.*)", route);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

std::pair<std::string, int> parse_address(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size()) {
    throw Error(ErrorCode::kBadParams, "address must be host:port, got '" + addr + "'");
  }
  int port = 0;
  const char* b = addr.data() + colon + 1;
  const char* e = addr.data() + addr.size();
  auto [ptr, ec] = std::from_chars(b, e, port);
  if (ec != std::errc() || ptr != e || port < 0 || port > 65535) {
    throw Error(ErrorCode::kBadParams, "bad port in '" + addr + "'");
  }
  return {addr.substr(0, colon), port};
}

}  // namespace adanpc::service
