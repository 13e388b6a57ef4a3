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
#include "ssn/service.hpp"

#include <array>
#include <cstdio>
#include <regex>

#include "ssn/image_io.hpp"
#include "ssn/ops.hpp"
#include "ssn/rng.hpp"
#include "ssn/synth.hpp"

namespace ssn::service {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string bytes_to_string(const std::vector<std::uint8_t>& v) { return {v.begin(), v.end()}; }

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

nlohmann::json class_counts(const LabelMap& labels, int k) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(k));
  for (auto l : labels.labels) ++counts[l];
  return counts;
}

double mean_confidence(const Tensor& probs, const LabelMap& labels) {
  return static_cast<double>(psi(probs, labels));
}

}  // namespace

std::string base64_encode(const std::string& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = static_cast<std::uint8_t>(bytes[i]) << 16 |
                            static_cast<std::uint8_t>(bytes[i + 1]) << 8 |
                            static_cast<std::uint8_t>(bytes[i + 2]);
    for (int s = 18; s >= 0; s -= 6) out += kAlphabet[(v >> s) & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t v = static_cast<std::uint8_t>(bytes[i]) << 16;
    if (rest == 2) v |= static_cast<std::uint8_t>(bytes[i + 1]) << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string base64_decode(const std::string& text) {
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (int i = 0; i < 64; ++i) lookup[static_cast<unsigned char>(kAlphabet[i])] = i;
  std::string out;
  std::uint32_t acc = 0;
  int bits = 0, pad = 0;
  std::size_t symbols = 0;
  for (char ch : text) {
    if (ch == '\n' || ch == '\r') continue;
    ++symbols;
    if (ch == '=') {
      ++pad;
      continue;
    }
    const int v = lookup[static_cast<unsigned char>(ch)];
    if (v < 0 || pad > 0) throw ValidationError("invalid_base64", "invalid base64 payload");
    acc = acc << 6 | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out += static_cast<char>((acc >> bits) & 0xFF);
    }
  }
  if (pad > 2 || symbols % 4 != 0) throw ValidationError("invalid_base64", "invalid base64 length");
  return out;
}

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
  return {status, {{"error", {{"code", code}, {"message", message}}}}};
}

SessionService::SessionService(ServiceConfig config, Clock clock)
    : config_(std::move(config)), clock_(std::move(clock)) {}

std::vector<std::string> SessionService::scan_models() {
  std::vector<std::string> skipped;
  if (config_.models_dir.empty() || !std::filesystem::is_directory(config_.models_dir)) {
    return skipped;
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(config_.models_dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      add_model(f.stem().string(), std::make_shared<const Model>(load_weights(f)));
    } catch (const Error&) {
      skipped.push_back(f.filename().string());
    }
  }
  return skipped;
}

void SessionService::add_model(const std::string& id, std::shared_ptr<const Model> model) {
  std::lock_guard lock(mu_);
  models_[id] = std::move(model);
}

void SessionService::expire_idle() {
  const auto now = clock_();
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (now - it->second->last_used > config_.session_ttl && !it->second->in_flight) {
      expired_.insert(it->first);
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id,
                                                              ApiResponse& err) {
  std::lock_guard lock(mu_);
  expire_idle();
  auto it = sessions_.find(id);
  if (it == sessions_.end()) {
    err = expired_.count(id) ? error_response(404, "session_expired", "session " + id + " expired")
                             : error_response(404, "session_not_found", "no session " + id);
    return nullptr;
  }
  it->second->last_used = clock_();
  return it->second;
}

nlohmann::json SessionService::entry_json(const Session& s, const Entry& e) const {
  return {{"session_id", s.id},
          {"model_id", s.model_id},
          {"height", e.labels.height},
          {"width", e.labels.width},
          {"segmentation", base64_encode(bytes_to_string(image_io::encode_mask(e.labels)))},
          {"class_counts", class_counts(e.labels, s.weights->base().config.num_classes)},
          {"mean_confidence", e.confidence},
          {"scribbles", base64_encode(bytes_to_string(
                            image_io::encode_mask(mask_overlay(e.constraints))))},
          {"history_depth", s.history.size()}};
}

ApiResponse SessionService::create_session(const nlohmann::json& body) {
  if (!body.is_object()) return error_response(400, "invalid_request", "body must be a JSON object");
  const std::string model_id = body.value("model_id", std::string());
  std::shared_ptr<const Model> model;
  {
    std::lock_guard lock(mu_);
    auto it = models_.find(model_id);
    if (it == models_.end()) {
      return error_response(404, "model_not_found", "unknown model '" + model_id + "'");
    }
    model = it->second;
  }
  Tensor image;
  try {
    if (body.contains("image")) {
      image = image_io::decode_image(as_bytes(base64_decode(body["image"].get<std::string>())));
    } else if (body.contains("dataset_ref")) {
      const auto& ref = body["dataset_ref"];
      synth::DatasetSpec spec = synth::DatasetSpec::from_json(ref.value("spec", nlohmann::json::object()));
      spec.tag = synth::distribution_from_string(ref.value("tag", std::string("A")));
      spec.first_index = ref.value("index", 0);
      spec.count = 1;
      image = synth::generate(spec, ref.value("seed", config_.seed)).front().image;
    } else {
      return error_response(400, "invalid_request", "request needs 'image' or 'dataset_ref'");
    }
    model->config.validate_image(image.shape());
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, "invalid_request", e.what());
  } catch (const Error& e) {
    return error_response(400, "undecodable_image", e.what());
  }

  auto s = std::make_shared<Session>();
  s->model_id = model_id;
  s->image = std::move(image);
  s->weights = std::make_unique<InstanceWeights>(model, config_.refine.trainable_layers);
  const Segmentation seg = segment(*s->weights, s->image);
  s->history.push_back({seg.labels, mean_confidence(seg.probs, seg.labels), s->weights->tail(),
                        ScribbleMask(seg.labels.height, seg.labels.width)});
  {
    std::lock_guard lock(mu_);
    expire_idle();
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(derive_seed(config_.seed, next_session_++)));
    s->id = buf;
    s->last_used = clock_();
    sessions_[s->id] = s;
  }
  return {201, entry_json(*s, s->history.back())};
}

ApiResponse SessionService::submit_scribbles(const std::string& id, const nlohmann::json& body) {
  ApiResponse err;
  auto s = find(id, err);
  if (!s) return err;
  std::unique_lock busy(s->busy, std::try_to_lock);
  if (!busy.owns_lock()) {
    return error_response(409, "refine_in_progress", "a refine is already running for " + id);
  }
  if (!body.is_object() || !body.contains("strokes")) {
    return error_response(422, "invalid_strokes", "body needs a 'strokes' array");
  }
  const SegNetConfig& net = s->weights->base().config;
  RefineConfig rc = config_.refine;
  RegionGrowConfig grow = config_.grow;
  bool do_grow = false;
  ScribbleMask fresh;
  try {
    if (body.contains("refine")) rc = RefineConfig::from_json(body["refine"], rc);
    rc.validate(s->weights->base().layer_count());
    do_grow = body.value("region_grow", false);
    grow.threshold = body.value("T", grow.threshold);
    fresh = rasterize(strokes_from_json(body["strokes"]), s->image.dim(1), s->image.dim(2),
                      net.num_classes);
  } catch (const nlohmann::json::exception& e) {
    return error_response(422, "invalid_strokes", e.what());
  } catch (const ValidationError& e) {
    return error_response(422, e.code(), e.what());
  }
  if (do_grow) fresh = region_grow(s->image, fresh, grow);

  if (rc.trainable_layers != s->weights->trainable_layers()) {
    return error_response(422, "invalid_layer_count",
                          "l is fixed per session at " + std::to_string(s->weights->trainable_layers()));
  }
  s->in_flight = true;
  Entry next{.labels = {}, .confidence = 0, .tail = {}, .constraints = s->history.back().constraints};
  next.constraints.merge(fresh);
  RefineReport report;
  try {
    auto outcome = refine(s->image, next.constraints, *s->weights, rc);
    report = std::move(outcome.report);
    next.confidence = mean_confidence(outcome.segmentation.probs, outcome.segmentation.labels);
    next.labels = std::move(outcome.segmentation.labels);
  } catch (const RefineAborted& e) {
    s->weights->restore(s->history.back().tail);
    s->in_flight = false;
    auto r = error_response(422, e.code(), e.what());
    r.body["report"] = e.report().to_json(false);
    return r;
  } catch (const Error& e) {
    s->weights->restore(s->history.back().tail);
    s->in_flight = false;
    return error_response(422, e.code(), e.what());
  }
  next.tail = s->weights->tail();
  s->history.push_back(std::move(next));
  if (s->history.size() > config_.history_limit) s->history.erase(s->history.begin() + 1);
  s->in_flight = false;
  {
    std::lock_guard lock(mu_);
    s->last_used = clock_();
  }
  auto body_out = entry_json(*s, s->history.back());
  body_out["report"] = report.to_json(false);
  return {200, body_out};
}

ApiResponse SessionService::undo(const std::string& id) {
  ApiResponse err;
  auto s = find(id, err);
  if (!s) return err;
  std::unique_lock busy(s->busy, std::try_to_lock);
  if (!busy.owns_lock()) {
    return error_response(409, "refine_in_progress", "a refine is already running for " + id);
  }
  const bool at_initial = s->history.size() == 1;
  if (!at_initial) {
    s->history.pop_back();
    s->weights->restore(s->history.back().tail);
  }
  auto body = entry_json(*s, s->history.back());
  body["at_initial"] = s->history.size() == 1;
  return {200, body};
}

ApiResponse SessionService::segmentation(const std::string& id) {
  ApiResponse err;
  auto s = find(id, err);
  if (!s) return err;
  std::unique_lock busy(s->busy, std::try_to_lock);
  if (!busy.owns_lock()) {
    return error_response(409, "refine_in_progress", "a refine is already running for " + id);
  }
  return {200, entry_json(*s, s->history.back())};
}

ApiResponse SessionService::models() const {
  std::lock_guard lock(mu_);
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [id, m] : models_) {
    list.push_back({{"id", id},
                    {"num_classes", m->config.num_classes},
                    {"in_channels", m->config.in_channels},
                    {"base_width", m->config.base_width},
                    {"depth", m->config.depth},
                    {"layers", m->layer_count()}});
  }
  return {200, {{"models", list}}};
}

ApiResponse SessionService::health() const { return {200, {{"status", "ok"}}}; }

bool SessionService::refining(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  return it != sessions_.end() && it->second->in_flight;
}

std::size_t SessionService::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

ApiResponse SessionService::dispatch(const std::string& method, const std::string& path,
                                     const std::string& body) {
  static const std::regex session_re(R"(^/v1/sessions/([0-9A-Za-z_-]+)(/(scribbles|undo|segmentation))?$)");
  nlohmann::json j;
  if (method == "POST") {
    try {
      j = body.empty() ? nlohmann::json::object() : nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      return error_response(400, "invalid_json", e.what());
    }
  }
  if (method == "GET" && path == "/v1/healthz") return health();
  if (method == "GET" && path == "/v1/models") return models();
  if (method == "POST" && path == "/v1/sessions") return create_session(j);
  std::smatch m;
  if (std::regex_match(path, m, session_re)) {
    const std::string id = m[1], action = m[3];
    if (method == "POST" && action == "scribbles") return submit_scribbles(id, j);
    if (method == "POST" && action == "undo") return undo(id);
    if (method == "GET" && action == "segmentation") return segmentation(id);
    return error_response(405, "method_not_allowed", method + " " + path);
  }
  return error_response(404, "not_found", "no route for " + method + " " + path);
}

}  // namespace ssn::service
