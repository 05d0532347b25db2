// Copyright 2026 The guidedgen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Control service: request handlers for model listing, controlled
// generation, text scoring and session lookup, plus the append-only session
// log. Handlers take and return JSON bodies and are transport-agnostic; the
// HTTP binding lives in http_server.h.

#ifndef GUIDEDGEN_SERVICE_H_
#define GUIDEDGEN_SERVICE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "guidedgen/registry.h"

namespace guidedgen {

inline constexpr std::string_view kApiSchema = "guidedgen/1";

struct Response {
  int status = 200;
  nlohmann::json body;
};

// Flat JSONL file of session records. Appends are serialized; each record
// gets the next sequence number and a session id derived from it.
class SessionLog {
 public:
  // Opens (creating if needed) and indexes an existing log.
  explicit SessionLog(std::filesystem::path path);

  // Adds "seq" and "session_id" to `record`, appends it as one line and
  // returns the completed record.
  nlohmann::json append(nlohmann::json record);

  std::optional<nlohmann::json> find(std::string_view session_id) const;
  std::vector<nlohmann::json> records() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::vector<nlohmann::json> records_;
  std::uint64_t next_seq_ = 1;
};

struct ServiceLimits {
  int max_new_tokens = 400;
  int max_samples = 32;
  std::size_t max_prompt_bytes = 8192;
};

class ControlService {
 public:
  // `log` may be null, in which case nothing is persisted.
  ControlService(std::shared_ptr<const ModelRegistry> registry,
                 std::shared_ptr<SessionLog> log, ServiceLimits limits = {});

  // Source of seeds for requests that omit one; values stay below 2^53 so
  // they survive a round trip through JavaScript numbers.
  void set_seed_source(std::function<std::uint64_t()> source);

  Response handle_models() const;
  Response handle_generate(const nlohmann::json& request);
  Response handle_score(const nlohmann::json& request) const;
  Response handle_session(std::string_view session_id) const;

  // Generation without logging (the seed must be present). Used to audit
  // the log.
  Response generate_unlogged(const nlohmann::json& request) const;

 private:
  nlohmann::json run_generate(const nlohmann::json& request,
                              std::uint64_t seed) const;

  std::shared_ptr<const ModelRegistry> registry_;
  std::shared_ptr<SessionLog> log_;
  ServiceLimits limits_;
  std::function<std::uint64_t()> seed_source_;
  mutable std::mutex seed_mu_;
};

// Error body for `e` and its HTTP status.
Response error_response(const std::exception& e);

struct ReplayReport {
  std::size_t sessions = 0;
  std::size_t candidates = 0;
  std::vector<std::string> mismatched_sessions;
};

// Re-runs every logged request and compares candidate digests.
ReplayReport replay_log(const SessionLog& log, const ControlService& service);

struct ServiceConfig {
  std::string listen_address = "127.0.0.1";
  int port = 8080;
  std::filesystem::path model_dir = "models";
  std::filesystem::path log_path = "sessions.jsonl";
  int threads = 4;

  // JSON file with the fields above; relative paths resolve against the
  // file's directory.
  static ServiceConfig load(const std::filesystem::path& path);

  // GUIDEDGEN_LISTEN_ADDRESS, GUIDEDGEN_PORT, GUIDEDGEN_MODEL_DIR,
  // GUIDEDGEN_LOG_PATH and GUIDEDGEN_THREADS override the file.
  void apply_environment(
      const std::function<const char*(const char*)>& getenv_fn);
};

}  // namespace guidedgen

#endif  // GUIDEDGEN_SERVICE_H_
