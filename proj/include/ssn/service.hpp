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
#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "ssn/refine.hpp"
#include "ssn/scribble.hpp"

namespace ssn::service {

std::string base64_encode(const std::string& bytes);
// Throws ValidationError("invalid_base64").
std::string base64_decode(const std::string& text);

struct ServiceConfig {
  std::filesystem::path models_dir;
  std::chrono::seconds session_ttl{30 * 60};
  std::uint64_t seed = 7;
  std::size_t history_limit = 50;
  RefineConfig refine;
  RegionGrowConfig grow;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

ApiResponse error_response(int status, const std::string& code, const std::string& message);

class SessionService {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  explicit SessionService(ServiceConfig config, Clock clock = std::chrono::steady_clock::now);

  // Loads every readable weight file in models_dir; the model id is the
  // file stem. Unreadable files are skipped and returned.
  std::vector<std::string> scan_models();
  void add_model(const std::string& id, std::shared_ptr<const Model> model);

  ApiResponse create_session(const nlohmann::json& body);
  ApiResponse submit_scribbles(const std::string& id, const nlohmann::json& body);
  ApiResponse undo(const std::string& id);
  ApiResponse segmentation(const std::string& id);
  ApiResponse models() const;
  ApiResponse health() const;

  // Routes a raw request; undecodable JSON bodies give 400.
  ApiResponse dispatch(const std::string& method, const std::string& path,
                       const std::string& body);

  // True while a refine for the session is in flight.
  bool refining(const std::string& id) const;
  std::size_t session_count() const;

 private:
  struct Entry {
    LabelMap labels;
    double confidence = 0;
    std::vector<ParamGroup<float>> tail;
    ScribbleMask constraints;
  };
  struct Session {
    std::string id;
    std::string model_id;
    Tensor image;
    std::unique_ptr<InstanceWeights> weights;
    std::vector<Entry> history;
    std::chrono::steady_clock::time_point last_used;
    std::mutex busy;
    std::atomic<bool> in_flight{false};
  };

  std::shared_ptr<Session> find(const std::string& id, ApiResponse& err);
  void expire_idle();
  nlohmann::json entry_json(const Session& s, const Entry& e) const;

  ServiceConfig config_;
  Clock clock_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const Model>> models_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::set<std::string> expired_;
  std::uint64_t next_session_ = 0;
};

class HttpServer {
 public:
  explicit HttpServer(SessionService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 binds an ephemeral port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called from another thread.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Serves `service` over HTTP until the process is stopped.
void serve(SessionService& service, const std::string& host, int port);

}  // namespace ssn::service
