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

// JSON service over one memory bank: prediction with neighbor inspection,
// per-query curation, commit, and an append-only audit log.
//
// AdaptService holds all behavior and is driven either in-process through
// handle() or over HTTP by HttpServer. Reads share the bank lock; commit
// and adapt take it exclusively.

#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adanpc/classifier.hpp"
#include "adanpc/memory_bank.hpp"

namespace httplib {
class Server;
}

namespace adanpc::service {

struct ServiceConfig {
  AdaptConfig adapt;
  bool readonly = false;
};

struct Response {
  int status = 200;
  nlohmann::json body;
};

using QueryParams = std::multimap<std::string, std::string>;

class AdaptService {
 public:
  AdaptService(MemoryBank bank, ServiceConfig config);

  /// Routes one request. `path` excludes the query string.
  Response handle(const std::string& method, const std::string& path, const std::string& body,
                  const QueryParams& params = {});

  Response predict(const nlohmann::json& body);
  Response curate(const nlohmann::json& body);
  Response curate_clear(const nlohmann::json& body);
  Response commit(const nlohmann::json& body);
  Response adapt(const nlohmann::json& body);
  Response stats() const;
  Response entry(EntryId id, bool include_feature) const;
  Response audit() const;

  MemoryBank bank_copy() const;
  const ServiceConfig& config() const { return config_; }

 private:
  struct QueryState {
    std::vector<float> feature;
    std::size_t k = 0;
    std::uint32_t domain_id = 0;
    ExclusionSet excluded;
    std::vector<EntryId> excluded_order;
    Prediction prediction;
    std::uint64_t bank_version = 0;
  };

  nlohmann::json prediction_json(const std::string& query_id, const QueryState& q) const;
  void record(const std::string& endpoint, const nlohmann::json& request, int status);

  ServiceConfig config_;
  mutable std::shared_mutex bank_mutex_;
  MemoryBank bank_;
  // Guards queries_, audit_ and next_query_.
  mutable std::mutex state_mutex_;
  std::map<std::string, QueryState> queries_;
  std::vector<nlohmann::json> audit_;
  std::uint64_t next_query_ = 1;
};

/// Re-issues every recorded request against a fresh service on `initial`
/// and returns the resulting bank.
MemoryBank replay_audit(MemoryBank initial, const nlohmann::json& events,
                        const ServiceConfig& config);

nlohmann::json provenance_json(const Provenance& p);

/// HTTP/1.1 front end for an AdaptService.
class HttpServer {
 public:
  explicit HttpServer(AdaptService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to host:port (port 0 picks a free port) and returns the port.
  /// Throws Io when binding fails.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called.
  void listen();
  void stop();

 private:
  AdaptService& service_;
  std::unique_ptr<httplib::Server> server_;
};

/// Splits "host:port". Throws BadParams.
std::pair<std::string, int> parse_address(const std::string& addr);

}  // namespace adanpc::service
