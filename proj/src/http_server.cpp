// Copyright 2026 The ScribbleSeg Authors. All Rights Reserved.
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
#include <httplib.h>

#include "ssn/service.hpp"

namespace ssn::service {

namespace {

void send(httplib::Response& res, const ApiResponse& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

}  // namespace

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(SessionService& service) : impl_(std::make_unique<Impl>()) {
  auto& server = impl_->server;
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  auto route = [&service](const httplib::Request& req, httplib::Response& res) {
    send(res, service.dispatch(req.method, req.path, req.body));
  };
  server.Get(R"(/v1/.*)", route);
  server.Post(R"(/v1/.*)", route);
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    send(res, error_response(500, "internal_error", what));
  });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    throw IoError("bind_failed", "cannot listen on " + host + ":" + std::to_string(port));
  }
  return bound;
}

void HttpServer::run() {
  if (!impl_->server.listen_after_bind()) throw IoError("listen_failed", "server stopped with an error");
}

void HttpServer::stop() { impl_->server.stop(); }

void serve(SessionService& service, const std::string& host, int port) {
  HttpServer server(service);
  server.bind(host, port);
  server.run();
}

}  // namespace ssn::service
