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


#include "guidedgen/service.h"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include "guidedgen/records.h"

namespace guidedgen {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kMaxSeed = (std::uint64_t{1} << 53) - 1;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return 400;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kFailedPrecondition: return 409;
    default: return 500;
  }
}

class NotFound : public Error {
 public:
  NotFound(std::string field, const std::string& message)
      : Error(ErrorCode::kNotFound, message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void check_schema(const json& request) {
  if (!request.is_object()) throw FieldError("body", "expected a JSON object");
  if (request.contains("schema") && request.at("schema") != kApiSchema) {
    throw FieldError("schema", "unsupported schema, expected " + std::string(kApiSchema));
  }
}

std::uint64_t default_seed() {
  std::random_device rd;
  const std::uint64_t hi = rd();
  return ((hi << 32) | rd()) & kMaxSeed;
}

std::uint64_t parse_seed(const json& request) {
  const json& s = request.at("seed");
  if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
    throw FieldError("seed", "expected a non-negative integer");
  }
  return s.get<std::uint64_t>();
}

}  // namespace

Response error_response(const std::exception& e) {
  json err = {{"message", e.what()}};
  int status = 500;
  if (const auto* fe = dynamic_cast<const FieldError*>(&e)) {
    err["code"] = to_string(fe->code());
    err["field"] = fe->field();
    status = 400;
  } else if (const auto* nf = dynamic_cast<const NotFound*>(&e)) {
    err["code"] = to_string(nf->code());
    err["field"] = nf->field();
    status = 404;
  } else if (const auto* ge = dynamic_cast<const Error*>(&e)) {
    err["code"] = to_string(ge->code());
    status = http_status(ge->code());
  } else {
    err["code"] = to_string(ErrorCode::kInternal);
  }
  return {status, {{"schema", kApiSchema}, {"error", err}}};
}

// --- session log --------------------------------------------------------------------

SessionLog::SessionLog(fs::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path_.parent_path(), ec);
  }
  std::ifstream in(path_);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      json r = json::parse(line);
      next_seq_ = std::max(next_seq_, r.at("seq").get<std::uint64_t>() + 1);
      records_.push_back(std::move(r));
    } catch (const json::exception&) {
      fail(ErrorCode::kDataLoss, path_.string() + ": line " + std::to_string(n) + ": malformed record");
    }
  }
  std::ofstream touch(path_, std::ios::app);
  if (!touch) fail(ErrorCode::kIo, "cannot open session log " + path_.string());
}

json SessionLog::append(json record) {
  std::lock_guard lock(mu_);
  const std::uint64_t seq = next_seq_;
  record["seq"] = seq;
  record["session_id"] = "s-" + std::to_string(seq);
  std::ofstream out(path_, std::ios::app);
  out << record.dump() << '\n';
  out.flush();
  if (!out) fail(ErrorCode::kIo, "session log append failed: " + path_.string());
  ++next_seq_;
  records_.push_back(record);
  return record;
}

std::optional<json> SessionLog::find(std::string_view session_id) const {
  std::lock_guard lock(mu_);
  for (const auto& r : records_) {
    if (r.at("session_id") == session_id) return std::optional<json>(std::in_place, r);
  }
  return std::nullopt;
}

std::vector<json> SessionLog::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

// --- service ---------------------------------------------------------------------------

ControlService::ControlService(std::shared_ptr<const ModelRegistry> registry,
                               std::shared_ptr<SessionLog> log, ServiceLimits limits)
    : registry_(std::move(registry)),
      log_(std::move(log)),
      limits_(limits),
      seed_source_(default_seed) {
  if (!registry_) fail(ErrorCode::kInvalidArgument, "service needs a registry");
}

void ControlService::set_seed_source(std::function<std::uint64_t()> source) {
  std::lock_guard lock(seed_mu_);
  seed_source_ = std::move(source);
}

Response ControlService::handle_models() const {
  const json manifest = registry_->manifest();
  json models = json::array();
  for (const auto& b : manifest.at("bases")) {
    json e = b;
    e["kind"] = "base";
    e["vocab_hash"] = hex64(registry_->vocab().hash());
    models.push_back(std::move(e));
  }
  for (const auto& a : manifest.at("attributes")) {
    json e = a;
    e["kind"] = "attribute";
    e["vocab_hash"] = hex64(registry_->vocab().hash());
    models.push_back(std::move(e));
  }
  const json presets = json::array(
      {{{"name", "single"}, {"weights", {{"attribute", kSingleAttributeWeight}}}},
       {{"name", "double"},
        {"weights", {{"first", kDoubleAttributeWeight}, {"second", kDoubleAttributeWeight}}}},
       {{"name", "triple"},
        {"weights", {{"polite", kTripleStyleWeight}, {"detox", kTripleStyleWeight},
                     {"emotion", kTripleEmotionWeight}}}}});
  return {200, {{"schema", kApiSchema},
                {"registry", registry_->fingerprint()},
                {"models", models},
                {"presets", presets}}};
}

json ControlService::run_generate(const json& request, std::uint64_t seed) const {
  // Model.
  if (!request.contains("model") || !request.at("model").is_string()) {
    throw FieldError("model", "required string");
  }
  const auto model_name = request.at("model").get<std::string>();
  const BaseEntry* base = registry_->find_base(model_name);
  if (base == nullptr) throw NotFound("model", "unknown model '" + model_name + "'");
  const Vocabulary& vocab = registry_->vocab();

  // Prompt.
  if (!request.contains("prompt") || !request.at("prompt").is_string()) {
    throw FieldError("prompt", "required string");
  }
  const auto prompt_text = request.at("prompt").get<std::string>();
  if (prompt_text.size() > limits_.max_prompt_bytes) throw FieldError("prompt", "too long");
  const TokenSequence prompt = tokenize(prompt_text, vocab);
  if (prompt.empty()) throw FieldError("prompt", "has no tokens");

  // Weights: absent or empty means uncontrolled.
  std::vector<AttributeControl> controls;
  const json weights = request.contains("weights") ? request.at("weights") : json::object();
  if (!weights.is_object()) throw FieldError("weights", "expected an object");
  for (const auto& [name, value] : weights.items()) {
    if (!value.is_number() || !std::isfinite(value.get<double>()) || value.get<double>() < 0.0) {
      throw FieldError(name, "weight for '" + name + "' must be a finite number >= 0");
    }
    const AttributeEntry* a = registry_->find_attribute(name);
    if (a == nullptr) throw NotFound(name, "unknown attribute '" + name + "'");
    controls.push_back(a->control(value.get<double>()));
  }

  // Decoding overrides.
  GenerationConfig config;
  apply_generation_overrides(config, request.value("overrides", json(nullptr)), "overrides");
  if (config.max_new_tokens > limits_.max_new_tokens) {
    throw FieldError("overrides.max_new_tokens", "exceeds the service limit of " +
                                                     std::to_string(limits_.max_new_tokens));
  }
  if (config.num_samples > limits_.max_samples) {
    throw FieldError("overrides.num_samples",
                     "exceeds the service limit of " + std::to_string(limits_.max_samples));
  }
  config.seed = seed;

  json candidates = json::array();
  for (const auto& trace : generate(base->model, prompt, controls, config)) {
    const std::string text = detokenize(trace.content(), vocab);
    json posteriors = json::object();
    for (const auto& [name, v] : mean_posteriors(trace, controls)) {
      posteriors[name] = v ? json(*v) : json(nullptr);
    }
    json scores = json::object();
    for (const auto& a : registry_->attributes()) scores[a.name] = a.score(text);
    candidates.push_back({{"index", trace.index},
                          {"text", text},
                          {"tokens", trace.tokens.ids},
                          {"terminated_by", to_string(trace.terminated_by)},
                          {"mean_posteriors", posteriors},
                          {"scores", scores},
                          {"digest", candidate_digest(text, trace.tokens.ids)}});
  }
  json effective = to_json(config);
  return {{"schema", kApiSchema},
          {"model", model_name},
          {"prompt", prompt_text},
          {"weights", weights},
          {"overrides", request.value("overrides", json::object())},
          {"generation", effective},
          {"seed", seed},
          {"registry", registry_->fingerprint()},
          {"candidates", candidates}};
}

Response ControlService::handle_generate(const json& request) {
  try {
    check_schema(request);
    std::uint64_t seed;
    if (request.contains("seed") && !request.at("seed").is_null()) {
      seed = parse_seed(request);
    } else {
      std::lock_guard lock(seed_mu_);
      seed = seed_source_();
    }
    json response = run_generate(request, seed);
    if (log_) {
      json digests = json::array();
      json score_sums = json::object();
      for (const auto& c : response.at("candidates")) {
        digests.push_back(c.at("digest"));
        for (const auto& [name, v] : c.at("scores").items()) {
          score_sums[name] = score_sums.value(name, 0.0) + v.get<double>();
        }
      }
      const auto n = static_cast<double>(response.at("candidates").size());
      for (auto& [name, v] : score_sums.items()) v = v.get<double>() / n;
      json logged_request = {{"model", response.at("model")},
                             {"prompt", response.at("prompt")},
                             {"weights", response.at("weights")},
                             {"overrides", response.at("overrides")},
                             {"seed", seed}};
      const json record = log_->append({{"timestamp", utc_timestamp()},
                                        {"registry", response.at("registry")},
                                        {"request", logged_request},
                                        {"digests", digests},
                                        {"summary", {{"candidates", digests.size()},
                                                     {"mean_scores", score_sums}}}});
      response["session_id"] = record.at("session_id");
    } else {
      response["session_id"] = nullptr;
    }
    return {200, std::move(response)};
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

Response ControlService::generate_unlogged(const json& request) const {
  try {
    check_schema(request);
    if (!request.contains("seed")) throw FieldError("seed", "required for unlogged generation");
    return {200, run_generate(request, parse_seed(request))};
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

Response ControlService::handle_score(const json& request) const {
  try {
    check_schema(request);
    if (!request.contains("text") || !request.at("text").is_string()) {
      throw FieldError("text", "required string");
    }
    const auto text = request.at("text").get<std::string>();
    std::vector<const AttributeEntry*> wanted;
    if (request.contains("attributes") && !request.at("attributes").is_null()) {
      const json& names = request.at("attributes");
      if (!names.is_array()) throw FieldError("attributes", "expected an array of names");
      for (const auto& n : names) {
        if (!n.is_string()) throw FieldError("attributes", "expected an array of names");
        const auto name = n.get<std::string>();
        const AttributeEntry* a = registry_->find_attribute(name);
        if (a == nullptr) throw NotFound(name, "unknown attribute '" + name + "'");
        wanted.push_back(a);
      }
    } else {
      for (const auto& a : registry_->attributes()) wanted.push_back(&a);
    }
    json scores = json::object();
    for (const auto* a : wanted) scores[a->name] = a->score(text);
    return {200, {{"schema", kApiSchema}, {"text", text}, {"scores", scores}}};
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

Response ControlService::handle_session(std::string_view session_id) const {
  if (log_) {
    if (auto r = log_->find(session_id)) {
      return {200, {{"schema", kApiSchema}, {"session", *r}}};
    }
  }
  return error_response(NotFound("session_id", "unknown session '" + std::string(session_id) + "'"));
}

ReplayReport replay_log(const SessionLog& log, const ControlService& service) {
  ReplayReport report;
  for (const auto& record : log.records()) {
    ++report.sessions;
    const Response r = service.generate_unlogged(record.at("request"));
    json digests = json::array();
    if (r.status == 200) {
      for (const auto& c : r.body.at("candidates")) digests.push_back(c.at("digest"));
    }
    report.candidates += record.at("digests").size();
    if (digests != record.at("digests")) {
      report.mismatched_sessions.push_back(record.at("session_id").get<std::string>());
    }
  }
  return report;
}

// --- config ------------------------------------------------------------------------

ServiceConfig ServiceConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  ServiceConfig c;
  try {
    const json j = json::parse(in);
    for (const auto& [key, value] : j.items()) {
      if (key == "listen_address") {
        c.listen_address = value.get<std::string>();
      } else if (key == "port") {
        c.port = value.get<int>();
      } else if (key == "model_dir") {
        c.model_dir = path.parent_path() / value.get<std::string>();
      } else if (key == "log_path") {
        c.log_path = path.parent_path() / value.get<std::string>();
      } else if (key == "threads") {
        c.threads = value.get<int>();
      } else {
        fail(ErrorCode::kInvalidArgument, path.string() + ": unknown field " + key);
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, path.string() + ": " + e.what());
  }
  return c;
}

void ServiceConfig::apply_environment(
    const std::function<const char*(const char*)>& getenv_fn) {
  auto as_int = [](const char* name, const char* v) {
    try {
      std::size_t used = 0;
      const int x = std::stoi(v, &used);
      if (v[used] != '\0') throw std::invalid_argument(name);
      return x;
    } catch (const std::exception&) {
      fail(ErrorCode::kInvalidArgument, std::string(name) + " must be an integer");
    }
  };
  if (const char* v = getenv_fn("GUIDEDGEN_LISTEN_ADDRESS")) listen_address = v;
  if (const char* v = getenv_fn("GUIDEDGEN_PORT")) port = as_int("GUIDEDGEN_PORT", v);
  if (const char* v = getenv_fn("GUIDEDGEN_MODEL_DIR")) model_dir = v;
  if (const char* v = getenv_fn("GUIDEDGEN_LOG_PATH")) log_path = v;
  if (const char* v = getenv_fn("GUIDEDGEN_THREADS")) threads = as_int("GUIDEDGEN_THREADS", v);
}

}  // namespace guidedgen
