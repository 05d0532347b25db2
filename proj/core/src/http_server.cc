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


#include "guidedgen/http_server.h"

#include <csignal>
#include <iostream>

#include <httplib.h>

namespace guidedgen {
namespace {

using nlohmann::json;

void reply(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

// Parses a request body; malformed JSON becomes a 400 naming "body".
bool parse_body(const httplib::Request& req, httplib::Response& res, json& out) {
  try {
    out = json::parse(req.body);
    return true;
  } catch (const json::exception& e) {
    reply(res, {400, {{"schema", kApiSchema},
                      {"error", {{"code", "invalid_argument"},
                                 {"field", "body"},
                                 {"message", std::string("malformed JSON: ") + e.what()}}}}});
    return false;
  }
}

HttpServer* g_active = nullptr;

void on_signal(int) {
  if (g_active != nullptr) g_active->stop();
}

}  // namespace

struct HttpServer::Impl {
  std::shared_ptr<ControlService> service;
  httplib::Server server;
};

HttpServer::HttpServer(std::shared_ptr<ControlService> service, int threads)
    : impl_(std::make_unique<Impl>()) {
  impl_->service = std::move(service);
  const auto n = static_cast<std::size_t>(std::max(1, threads));
  impl_->server.new_task_queue = [n] { return new httplib::ThreadPool(n); };
  impl_->server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                     {"Access-Control-Allow-Headers", "Content-Type"},
                                     {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  auto* svc = impl_->service.get();
  impl_->server.Get("/models", [svc](const httplib::Request&, httplib::Response& res) {
    reply(res, svc->handle_models());
  });
  impl_->server.Post("/generate", [svc](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (parse_body(req, res, body)) reply(res, svc->handle_generate(body));
  });
  impl_->server.Post("/score", [svc](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (parse_body(req, res, body)) reply(res, svc->handle_score(body));
  });
  impl_->server.Get("/sessions/:id", [svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc->handle_session(req.path_params.at("id")));
  });
  impl_->server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& address, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(address)
                              : (impl_->server.bind_to_port(address, port) ? port : -1);
  if (bound < 0) {
    fail(ErrorCode::kIo, "cannot bind " + address + ":" + std::to_string(port));
  }
  return bound;
}

void HttpServer::serve() {
  if (!impl_->server.listen_after_bind()) {
    fail(ErrorCode::kIo, "server stopped with an error");
  }
}

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

int run_service(const ServiceConfig& config) {
  auto registry = std::make_shared<const ModelRegistry>(ModelRegistry::load(config.model_dir));
  auto log = std::make_shared<SessionLog>(config.log_path);
  auto service = std::make_shared<ControlService>(registry, log);
  HttpServer server(service, config.threads);
  const int port = server.bind(config.listen_address, config.port);
  std::cerr << "guidedgen: serving " << registry->bases().size() << " base and "
            << registry->attributes().size() << " attribute models on "
            << config.listen_address << ":" << port << std::endl;
  g_active = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.serve();
  g_active = nullptr;
  return 0;
}

}  // namespace guidedgen
