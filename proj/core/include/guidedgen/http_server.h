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


// HTTP binding of ControlService:
//   GET  /models
//   POST /generate
//   POST /score
//   GET  /sessions/{id}
// Bodies are JSON. CORS is open so a browser console on another origin can
// call the service.

#ifndef GUIDEDGEN_HTTP_SERVER_H_
#define GUIDEDGEN_HTTP_SERVER_H_

#include <memory>
#include <string>

#include "guidedgen/service.h"

namespace guidedgen {

class HttpServer {
 public:
  HttpServer(std::shared_ptr<ControlService> service, int threads = 4);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& address, int port);

  // Serves until stop(). Requires a successful bind().
  void serve();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Loads the registry and log named by `config` and serves until stopped by
// a signal. Returns the process exit code.
int run_service(const ServiceConfig& config);

}  // namespace guidedgen

#endif  // GUIDEDGEN_HTTP_SERVER_H_
