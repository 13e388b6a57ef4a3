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
#include "ssn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <sstream>
#include <thread>

#include "ssn/image_io.hpp"
#include "ssn/metrics.hpp"

namespace ssn::harness {

int InteractionLog::interactions_to_target(double target, int cap) const {
  if (initial_mean_dice >= target) return 0;
  for (const auto& r : records) {
    if (r.scribble_pixels > 0 && r.mean_dice >= target) return r.interaction;
  }
  return cap + 1;
}

double InteractionLog::mean_dice_after(int n) const {
  double d = initial_mean_dice;
  for (const auto& r : records) {
    if (r.interaction > n) break;
    if (r.scribble_pixels > 0) d = r.mean_dice;
  }
  return d;
}

double InteractionLog::class_dice_after(int n, int c) const {
  double d = initial_per_class_dice.at(c);
  for (const auto& r : records) {
    if (r.interaction > n) break;
    if (r.scribble_pixels > 0) d = r.per_class_dice.at(c);
  }
  return d;
}

std::string to_string(InputMode m) {
  switch (m) {
    case InputMode::kScribble: return "scribble";
    case InputMode::kPoint: return "point";
    case InputMode::kBox: return "box";
  }
  return "scribble";
}

InputMode input_mode_from_string(const std::string& s) {
  if (s == "scribble") return InputMode::kScribble;
  if (s == "point") return InputMode::kPoint;
  if (s == "box") return InputMode::kBox;
  throw ValidationError("invalid_input_mode", "input mode must be scribble, point or box");
}

ScribbleMask interaction_mask(const Sample& sample, const LabelMap& pred,
                              const std::vector<Stroke>& strokes, const SessionConfig& config,
                              int num_classes) {
  const int h = sample.gt.height, w = sample.gt.width;
  ScribbleMask mask(h, w);
  for (const Stroke& s : strokes) {
    switch (config.input_mode) {
      case InputMode::kScribble: mask.merge(rasterize({s}, h, w, num_classes)); break;
      case InputMode::kPoint: {
        const Point p = s.points[s.points.size() / 2];
        mask.set(p.row, p.col, s.label);
        break;
      }
      case InputMode::kBox: {
        int r0 = h, r1 = -1, c0 = w, c1 = -1;
        for (const Point& p : s.points) {
          r0 = std::min(r0, p.row), r1 = std::max(r1, p.row);
          c0 = std::min(c0, p.col), c1 = std::max(c1, p.col);
        }
        for (int y = std::max(0, r0 - 1); y <= std::min(h - 1, r1 + 1); ++y)
          for (int x = std::max(0, c0 - 1); x <= std::min(w - 1, c1 + 1); ++x)
            if (sample.gt.at(y, x) == s.label && pred.at(y, x) != s.label) mask.set(y, x, s.label);
        break;
      }
    }
  }
  if (config.region_grow && !mask.empty()) mask = region_grow(sample.image, mask, config.grow);
  return mask;
}

InteractionLog run_interactive_session(const Sample& sample, std::shared_ptr<const Model> model,
                                       const SessionConfig& config) {
  if (!model) throw ValidationError("missing_model", "session needs a model");
  config.refine.validate(model->layer_count());
  const int k = model->config.num_classes;
  InstanceWeights weights(model, config.refine.trainable_layers);
  LabelMap pred = segment(weights, sample.image).labels;

  InteractionLog log;
  log.initial_per_class_dice = per_class_dice(pred, sample.gt, k);
  log.initial_mean_dice = mean_dice(pred, sample.gt, k);
  if (log.initial_mean_dice >= config.target_dice) {
    log.records.push_back({1, 0, log.initial_per_class_dice, log.initial_mean_dice, 0, 0});
    return log;
  }
  ScribbleMask constraints(sample.gt.height, sample.gt.width);
  for (int i = 1; i <= config.max_interactions; ++i) {
    const auto strokes = next_scribbles(pred, sample.gt, config.oracle);
    if (strokes.empty()) break;
    int drawn = 0;
    for (const auto& s : strokes) drawn += static_cast<int>(s.points.size());
    if (config.input_mode == InputMode::kPoint) drawn = static_cast<int>(strokes.size());
    const ScribbleMask mask = interaction_mask(sample, pred, strokes, config, k);
    if (config.input_mode == InputMode::kBox) drawn = static_cast<int>(mask.size());
    constraints.merge(mask);
    auto outcome = refine(sample.image, constraints, weights, config.refine);
    pred = std::move(outcome.segmentation.labels);
    InteractionRecord rec;
    rec.interaction = i;
    rec.scribble_pixels = drawn;
    rec.per_class_dice = per_class_dice(pred, sample.gt, k);
    rec.mean_dice = mean_dice(pred, sample.gt, k);
    rec.epochs = outcome.report.epochs_run;
    rec.ms = config.record_timing ? outcome.report.wall_ms : 0.0;
    log.records.push_back(std::move(rec));
    if (log.records.back().mean_dice >= config.target_dice) break;
  }
  return log;
}

std::optional<RoundResult> run_single_round(const Sample& sample,
                                            std::shared_ptr<const Model> model,
                                            const SessionConfig& config) {
  if (!model) throw ValidationError("missing_model", "round needs a model");
  const int k = model->config.num_classes;
  const std::vector<ParamGroup<float>> before(model->groups.begin(), model->groups.end());
  const Segmentation initial = segment(*model, sample.image);
  RoundResult r;
  r.strokes = next_scribbles(initial.labels, sample.gt, config.oracle);
  if (r.strokes.empty()) return std::nullopt;
  r.initial = initial.labels;
  r.constraints = interaction_mask(sample, initial.labels, r.strokes, config, k);
  InstanceWeights weights(model, config.refine.trainable_layers);
  auto outcome = refine(sample.image, r.constraints, weights, config.refine);
  r.refined = std::move(outcome.segmentation.labels);
  r.report = std::move(outcome.report);
  if (!config.record_timing) r.report.wall_ms = 0;
  r.painted = r.initial;
  for (const auto& [idx, label] : r.constraints.entries()) r.painted.labels[idx] = label;
  r.initial_dice = mean_dice(r.initial, sample.gt, k);
  r.refined_dice = mean_dice(r.refined, sample.gt, k);
  r.painted_dice = mean_dice(r.painted, sample.gt, k);
  const auto refs = weights.refs();
  for (int j = 0; j < weights.first_trainable(); ++j) {
    r.frozen_groups_intact = r.frozen_groups_intact && *refs[j] == before[j];
  }
  return r;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string row(int interaction, double pixels, double mean, const std::vector<double>& pc,
                double epochs, double ms) {
  std::string s = std::to_string(interaction) + "," + fmt(pixels) + "," + fmt(mean);
  for (double d : pc) s += "," + fmt(d);
  return s + "," + fmt(epochs) + "," + fmt(ms) + "\n";
}

}  // namespace

std::string csv_header(int num_classes) {
  std::string s = "interaction,scribble_pixels,mean_dice";
  for (int c = 0; c < num_classes; ++c) s += ",dice_" + std::to_string(c);
  return s + ",epochs,ms\n";
}

std::string log_csv(const InteractionLog& log, int num_classes) {
  std::string s = csv_header(num_classes);
  for (const auto& r : log.records) {
    s += row(r.interaction, r.scribble_pixels, r.mean_dice, r.per_class_dice, r.epochs, r.ms);
  }
  return s;
}

std::string curve_csv(const std::vector<InteractionLog>& logs, int num_classes,
                      int last_interaction) {
  std::string s = csv_header(num_classes);
  if (logs.empty()) return s;
  const double n = static_cast<double>(logs.size());
  for (int i = 0; i <= last_interaction; ++i) {
    double pixels = 0, mean = 0, epochs = 0, ms = 0;
    std::vector<double> pc(static_cast<std::size_t>(num_classes));
    for (const auto& log : logs) {
      mean += log.mean_dice_after(i);
      for (int c = 0; c < num_classes; ++c) pc[c] += log.class_dice_after(i, c);
      for (const auto& r : log.records) {
        if (r.interaction == i) {
          pixels += r.scribble_pixels;
          epochs += r.epochs;
          ms += r.ms;
        }
      }
    }
    for (double& v : pc) v /= n;
    s += row(i, pixels / n, mean / n, pc, epochs / n, ms / n);
  }
  return s;
}

// ---- experiments -----------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw ValidationError("invalid_config", "experiment config must be an object");
  try {
    c.seed = j.value("seed", c.seed);
    c.train_count = j.value("train_count", c.train_count);
    c.val_count = j.value("val_count", c.val_count);
    if (j.contains("data")) c.data = synth::DatasetSpec::from_json(j["data"]);
    if (j.contains("train")) {
      const auto& t = j["train"];
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.seed = t.value("seed", c.train.seed);
    }
    if (j.contains("net")) {
      const auto& n = j["net"];
      c.net.base_width = n.value("base_width", c.net.base_width);
      c.net.depth = n.value("depth", c.net.depth);
    }
    if (j.contains("refine")) c.session.refine = RefineConfig::from_json(j["refine"], c.session.refine);
    if (j.contains("oracle")) {
      c.session.oracle.max_strokes = j["oracle"].value("k", c.session.oracle.max_strokes);
      c.session.oracle.length = j["oracle"].value("L", c.session.oracle.length);
      c.session.oracle.seed = j["oracle"].value("seed", c.session.oracle.seed);
    }
    c.session.region_grow = j.value("region_grow", c.session.region_grow);
    c.session.grow.threshold = j.value("T", c.session.grow.threshold);
    c.session.grow.max_pixels = j.value("max_pixels", c.session.grow.max_pixels);
    if (j.contains("input_mode")) {
      c.session.input_mode = input_mode_from_string(j["input_mode"].get<std::string>());
    }
    c.session.target_dice = j.value("target_dice", c.session.target_dice);
    c.session.max_interactions = j.value("max_interactions", c.session.max_interactions);
    c.session.record_timing = j.value("record_timing", c.session.record_timing);
    if (j.contains("weights")) c.weights = j["weights"].get<std::string>();
    if (j.contains("cache_dir")) c.cache_dir = j["cache_dir"].get<std::string>();
    c.grid = j.value("grid", c.grid);
    c.threads = j.value("threads", c.threads);
    c.max_cases = j.value("max_cases", c.max_cases);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid_config", std::string("experiment config: ") + e.what());
  }
  c.data.num_classes = c.data.num_classes;
  c.session.oracle.validate();
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j = {
      {"seed", seed},
      {"train_count", train_count},
      {"val_count", val_count},
      {"data", data.to_json()},
      {"train",
       {{"epochs", train.epochs},
        {"learning_rate", train.learning_rate},
        {"batch_size", train.batch_size},
        {"seed", train.seed}}},
      {"net", {{"base_width", net.base_width}, {"depth", net.depth}}},
      {"refine", session.refine.to_json()},
      {"oracle", {{"k", session.oracle.max_strokes}, {"L", session.oracle.length}}},
      {"region_grow", session.region_grow},
      {"T", session.grow.threshold},
      {"max_pixels", session.grow.max_pixels},
      {"input_mode", to_string(session.input_mode)},
      {"target_dice", session.target_dice},
      {"max_interactions", session.max_interactions},
      {"grid", grid},
      {"max_cases", max_cases}};
  if (weights) j["weights"] = weights->string();
  return j;
}

std::string model_cache_key(const ExperimentConfig& c) {
  const nlohmann::json key = {{"data", c.data.to_json()},
                              {"train", c.to_json()["train"]},
                              {"net", c.to_json()["net"]},
                              {"seed", c.seed},
                              {"train_count", c.train_count}};
  const std::string s = key.dump();
  std::uint64_t hsh = 1469598103934665603ull;  // FNV-1a
  for (unsigned char ch : s) {
    hsh ^= ch;
    hsh *= 1099511628211ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "segnet_%016llx", static_cast<unsigned long long>(hsh));
  return buf;
}

std::shared_ptr<const Model> obtain_model(const ExperimentConfig& c) {
  if (c.weights) return std::make_shared<const Model>(load_weights(*c.weights));
  std::filesystem::path cached;
  if (c.cache_dir) {
    cached = *c.cache_dir / (model_cache_key(c) + ".ssnw");
    if (std::filesystem::exists(cached)) return std::make_shared<const Model>(load_weights(cached));
  }
  synth::DatasetSpec spec = c.data;
  spec.tag = synth::Distribution::kA;
  spec.first_index = 0;
  spec.count = c.train_count;
  const Dataset train = synth::generate(spec, c.seed);
  SegNetConfig net = c.net;
  net.in_channels = train.empty() ? 1 : train.front().image.dim(0);
  net.num_classes = spec.num_classes;
  auto trained = pretrain(init_model(net, c.seed), train, c.train);
  if (c.cache_dir) {
    std::filesystem::create_directories(*c.cache_dir);
    const auto tmp = cached.string() + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    save_weights(trained.model, tmp);
    std::filesystem::rename(tmp, cached);
    image_io::write_text(cached.string() + ".curve.csv", training_curve_csv(trained.curve));
  }
  return std::make_shared<const Model>(std::move(trained.model));
}

Dataset validation_set(const ExperimentConfig& c, synth::Distribution tag) {
  synth::DatasetSpec spec = c.data;
  spec.tag = tag;
  spec.first_index = c.train_count;
  spec.count = c.max_cases > 0 ? std::min(c.max_cases, c.val_count) : c.val_count;
  return synth::generate(spec, c.seed);
}

void ExperimentReport::write(const std::filesystem::path& dir) const {
  for (const auto& [name, contents] : files) {
    const auto p = dir / name;
    std::filesystem::create_directories(p.parent_path());
    image_io::write_text(p, contents);
  }
  std::filesystem::create_directories(dir);
  image_io::write_text(dir / "summary.json", summary.dump(2) + "\n");
}

std::vector<int> missing_structure_cases(const Dataset& data, const Model& model, int label) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(data.size()); ++i) {
    const LabelMap pred = segment(model, data[i].image).labels;
    bool present = false, missed = true;
    for (std::size_t p = 0; p < pred.size(); ++p) {
      if (data[i].gt.labels[p] != label) continue;
      present = true;
      if (pred.labels[p] != 0) missed = false;
    }
    if (present && missed) out.push_back(i);
  }
  return out;
}

namespace {

nlohmann::json stats(const std::vector<double>& v) {
  return {{"median", median(v)}, {"q25", quantile(v, 0.25)}, {"q75", quantile(v, 0.75)},
          {"n", v.size()}};
}

std::string case_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "cases/case_%03d.csv", i);
  return buf;
}

struct SuiteRun {
  std::vector<InteractionLog> logs;
  std::vector<double> interactions;
};

SuiteRun run_suite(const Dataset& data, const std::vector<int>& cases,
                   std::shared_ptr<const Model> model, const SessionConfig& session, int threads) {
  SuiteRun r;
  r.logs.resize(cases.size());
  parallel_for(static_cast<int>(cases.size()), threads, [&](int i) {
    r.logs[i] = run_interactive_session(data[cases[i]], model, session);
  });
  for (const auto& log : r.logs) {
    r.interactions.push_back(log.interactions_to_target(session.target_dice, session.max_interactions));
  }
  return r;
}

std::vector<int> all_cases(const Dataset& d) {
  std::vector<int> v(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) v[i] = static_cast<int>(i);
  return v;
}

void add_session_files(ExperimentReport& rep, const SuiteRun& run, const std::vector<int>& cases,
                       int k, int horizon) {
  int last = 0;
  for (const auto& log : run.logs) {
    if (!log.records.empty()) last = std::max(last, log.records.back().interaction);
  }
  rep.files.push_back({"curve.csv", curve_csv(run.logs, k, horizon > 0 ? horizon : last)});
  for (std::size_t i = 0; i < cases.size(); ++i) {
    rep.files.push_back({case_name(cases[i]), log_csv(run.logs[i], k)});
  }
}

nlohmann::json dice_curve(const SuiteRun& run, int horizon) {
  nlohmann::json curve = nlohmann::json::array();
  for (int i = 0; i <= horizon; ++i) {
    std::vector<double> v;
    for (const auto& log : run.logs) v.push_back(log.mean_dice_after(i));
    double s = 0;
    for (double x : v) s += x;
    curve.push_back({{"interaction", i}, {"mean_dice", v.empty() ? 0.0 : s / v.size()},
                     {"median_dice", median(v)}});
  }
  return curve;
}

ExperimentReport sessions_protocol(const Dataset& data, std::shared_ptr<const Model> model,
                                   SessionConfig session, int threads, int horizon) {
  const int k = model->config.num_classes;
  if (horizon > 0) session.max_interactions = horizon;
  const auto cases = all_cases(data);
  const SuiteRun run = run_suite(data, cases, model, session, threads);
  ExperimentReport rep;
  const int h = horizon > 0 ? horizon : session.max_interactions;
  rep.summary["interactions_to_target"] = stats(run.interactions);
  rep.summary["dice_curve"] = dice_curve(run, h);
  std::vector<double> initial, final_dice;
  for (const auto& log : run.logs) {
    initial.push_back(log.initial_mean_dice);
    final_dice.push_back(log.mean_dice_after(h));
  }
  rep.summary["initial_mean_dice"] = stats(initial);
  rep.summary["final_mean_dice"] = stats(final_dice);
  add_session_files(rep, run, cases, k, horizon);
  return rep;
}

struct RoundStats {
  double mean_refined = 0;
  double mean_initial = 0;
  double mean_painted = 0;
  double satisfied_fraction = 0;
  int rounds = 0;
};

RoundStats run_rounds(const Dataset& data, std::shared_ptr<const Model> model,
                      const SessionConfig& session, int threads) {
  std::vector<std::optional<RoundResult>> results(data.size());
  parallel_for(static_cast<int>(data.size()), threads,
               [&](int i) { results[i] = run_single_round(data[i], model, session); });
  RoundStats s;
  for (const auto& r : results) {
    if (!r) continue;
    ++s.rounds;
    s.mean_refined += r->refined_dice;
    s.mean_initial += r->initial_dice;
    s.mean_painted += r->painted_dice;
    s.satisfied_fraction += r->report.satisfied;
  }
  if (s.rounds) {
    s.mean_refined /= s.rounds;
    s.mean_initial /= s.rounds;
    s.mean_painted /= s.rounds;
    s.satisfied_fraction /= s.rounds;
  }
  return s;
}

}  // namespace

ExperimentReport run_experiment(const std::string& protocol, const ExperimentConfig& config,
                                std::shared_ptr<const Model> model) {
  if (std::find(protocol_names().begin(), protocol_names().end(), protocol) ==
      protocol_names().end()) {
    throw ValidationError("unknown_protocol", "unknown protocol '" + protocol + "'");
  }
  if (!model) model = obtain_model(config);
  const int k = model->config.num_classes;
  ExperimentReport rep;
  const SessionConfig& session = config.session;

  if (protocol == "multiclass") {
    rep = sessions_protocol(validation_set(config, synth::Distribution::kA), model,
                            session, config.threads, 0);
  } else if (protocol == "unseen_structure") {
    rep = sessions_protocol(validation_set(config, synth::Distribution::kUnseenShape),
                            model, session, config.threads, 0);
  } else if (protocol == "mismatch") {
    const Dataset a = validation_set(config, synth::Distribution::kA);
    const Dataset b = validation_set(config, synth::Distribution::kShifted);
    double in_dist = 0;
    for (const auto& s : a) in_dist += mean_dice(segment(*model, s.image).labels, s.gt, k);
    in_dist /= static_cast<double>(std::max<std::size_t>(1, a.size()));
    rep = sessions_protocol(b, model, session, config.threads, 5);
    rep.summary["in_distribution_initial_mean_dice"] = in_dist;
    double shifted = 0, after = 0;
    for (const auto& c : rep.summary["dice_curve"]) {
      if (c["interaction"] == 0) shifted = c["mean_dice"].get<double>();
      if (c["interaction"] == 5) after = c["mean_dice"].get<double>();
    }
    rep.summary["shifted_initial_mean_dice"] = shifted;
    rep.summary["shifted_mean_dice_after_5"] = after;
  } else if (protocol == "missing_label") {
    const Dataset data = validation_set(config, synth::Distribution::kUnseenShape);
    const auto cases = missing_structure_cases(data, *model, synth::kTumor);
    SessionConfig s = session;
    s.max_interactions = 3;
    const SuiteRun run = run_suite(data, cases, model, s, config.threads);
    std::vector<double> best;
    for (const auto& log : run.logs) {
      double b = 0;
      for (int i = 1; i <= 3; ++i) b = std::max(b, log.class_dice_after(i, synth::kTumor));
      best.push_back(b);
    }
    int recovered = 0;
    for (double b : best) recovered += b >= 0.7;
    rep.summary["cases"] = cases;
    rep.summary["class"] = synth::kTumor;
    rep.summary["recovered_class_dice_within_3"] = stats(best);
    rep.summary["recovered_fraction"] =
        best.empty() ? 0.0 : static_cast<double>(recovered) / best.size();
    add_session_files(rep, run, cases, k, 3);
  } else if (protocol == "ablation_M" || protocol == "ablation_l") {
    const bool is_m = protocol == "ablation_M";
    std::vector<double> grid = config.grid;
    if (grid.empty()) {
      if (is_m) {
        grid = {10, 25, 50, 100, 150, 200};
      } else {
        for (int l = 1; l <= model->layer_count(); ++l) grid.push_back(l);
      }
    }
    const Dataset data = validation_set(config, synth::Distribution::kA);
    std::string csv = std::string(is_m ? "M" : "l") +
                      ",mean_dice,initial_mean_dice,painted_mean_dice,satisfied_fraction\n";
    nlohmann::json curve = nlohmann::json::array();
    for (double v : grid) {
      SessionConfig s = session;
      (is_m ? s.refine.max_epochs : s.refine.trainable_layers) = static_cast<int>(v);
      const RoundStats st = run_rounds(data, model, s, config.threads);
      csv += std::to_string(static_cast<int>(v)) + "," + fmt(st.mean_refined) + "," +
             fmt(st.mean_initial) + "," + fmt(st.mean_painted) + "," + fmt(st.satisfied_fraction) +
             "\n";
      curve.push_back({{"value", static_cast<int>(v)},
                       {"mean_dice", st.mean_refined},
                       {"satisfied_fraction", st.satisfied_fraction}});
    }
    rep.summary["curve"] = curve;
    rep.files.push_back({"ablation.csv", csv});
  } else if (protocol == "ablation_scribble_length") {
    std::vector<double> grid = config.grid.empty() ? std::vector<double>{3, 5, 10} : config.grid;
    const Dataset data = validation_set(config, synth::Distribution::kA);
    const auto cases = all_cases(data);
    std::string csv = "length,region_grow,median_interactions,q25,q75,mean_final_dice\n";
    nlohmann::json rows = nlohmann::json::array();
    for (int grow = 1; grow >= 0; --grow) {
      for (double len : grid) {
        SessionConfig s = session;
        s.region_grow = grow;
        s.oracle.length = static_cast<int>(len);
        const SuiteRun run = run_suite(data, cases, model, s, config.threads);
        std::vector<double> fin;
        for (const auto& log : run.logs) fin.push_back(log.mean_dice_after(s.max_interactions));
        double mf = 0;
        for (double f : fin) mf += f;
        mf /= std::max<std::size_t>(1, fin.size());
        csv += std::to_string(static_cast<int>(len)) + "," + std::to_string(grow) + "," +
               fmt(median(run.interactions)) + "," + fmt(quantile(run.interactions, 0.25)) + "," +
               fmt(quantile(run.interactions, 0.75)) + "," + fmt(mf) + "\n";
        rows.push_back({{"length", static_cast<int>(len)},
                        {"region_grow", static_cast<bool>(grow)},
                        {"interactions_to_target", stats(run.interactions)}});
      }
    }
    rep.summary["rows"] = rows;
    rep.files.push_back({"ablation.csv", csv});
  } else if (protocol == "ablation_input_mode") {
    const Dataset data = validation_set(config, synth::Distribution::kA);
    const auto cases = all_cases(data);
    std::string csv = "input_mode,median_interactions,q25,q75,mean_input_units\n";
    nlohmann::json rows = nlohmann::json::array();
    for (InputMode m : {InputMode::kPoint, InputMode::kBox, InputMode::kScribble}) {
      SessionConfig s = session;
      s.input_mode = m;
      const SuiteRun run = run_suite(data, cases, model, s, config.threads);
      double units = 0;
      for (const auto& log : run.logs)
        for (const auto& r : log.records) units += r.scribble_pixels;
      units /= std::max<std::size_t>(1, run.logs.size());
      csv += to_string(m) + "," + fmt(median(run.interactions)) + "," +
             fmt(quantile(run.interactions, 0.25)) + "," + fmt(quantile(run.interactions, 0.75)) +
             "," + fmt(units) + "\n";
      rows.push_back({{"input_mode", to_string(m)},
                      {"interactions_to_target", stats(run.interactions)},
                      {"mean_input_units", units}});
    }
    rep.summary["rows"] = rows;
    rep.files.push_back({"ablation.csv", csv});
  }
  rep.summary["protocol"] = protocol;
  rep.summary["seed"] = config.seed;
  rep.summary["config"] = config.to_json();
  return rep;
}

}  // namespace ssn::harness
