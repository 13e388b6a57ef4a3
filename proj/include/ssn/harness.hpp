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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssn/oracle.hpp"
#include "ssn/refine.hpp"
#include "ssn/synth.hpp"

// Simulated-annotator experiments: interactive sessions, single refine
// rounds and the named protocols built from them.
namespace ssn::harness {

struct InteractionRecord {
  int interaction = 0;  // 1-based
  int scribble_pixels = 0;
  std::vector<double> per_class_dice;
  double mean_dice = 0;
  int epochs = 0;
  double ms = 0;
};

struct InteractionLog {
  double initial_mean_dice = 0;
  std::vector<double> initial_per_class_dice;
  std::vector<InteractionRecord> records;

  // 0 when the initial segmentation already meets `target`; otherwise the
  // first interaction reaching it, or `cap + 1` if none does.
  int interactions_to_target(double target, int cap) const;
  // Mean dice after `n` interactions, carrying the last value forward.
  double mean_dice_after(int n) const;
  double class_dice_after(int n, int c) const;
};

enum class InputMode {
  kScribble,  // the oracle stroke
  kPoint,     // its middle pixel only
  kBox,       // error pixels of its class inside the stroke's box grown by 1
};

std::string to_string(InputMode m);
InputMode input_mode_from_string(const std::string& s);

struct SessionConfig {
  RefineConfig refine;
  OracleConfig oracle;
  bool region_grow = false;
  RegionGrowConfig grow;
  InputMode input_mode = InputMode::kScribble;
  double target_dice = 0.95;
  int max_interactions = 20;
  bool record_timing = false;
};

// Constraint pixels for one interaction: strokes converted per the input
// mode, rasterized and optionally region-grown.
ScribbleMask interaction_mask(const Sample& sample, const LabelMap& pred,
                              const std::vector<Stroke>& strokes, const SessionConfig& config,
                              int num_classes);

// segment -> oracle scribbles -> (region growing) -> refine, repeated until
// the mean dice reaches the target or the interaction budget runs out.
// Scribbles accumulate over the session and the instance weights carry
// over between interactions.
InteractionLog run_interactive_session(const Sample& sample, std::shared_ptr<const Model> model,
                                       const SessionConfig& config);

// A single interaction from the pristine model.
struct RoundResult {
  LabelMap initial;
  LabelMap refined;
  LabelMap painted;  // initial prediction with the constraint pixels overwritten
  ScribbleMask constraints;
  std::vector<Stroke> strokes;
  RefineReport report;
  double initial_dice = 0;
  double refined_dice = 0;
  double painted_dice = 0;
  bool frozen_groups_intact = true;  // groups outside the final l unchanged
};

// Returns nullopt when the initial prediction has no errors.
std::optional<RoundResult> run_single_round(const Sample& sample,
                                            std::shared_ptr<const Model> model,
                                            const SessionConfig& config);

// Runs fn(0..n-1) on up to `threads` workers. Results land in their own
// slots, so the output does not depend on the thread count.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// CSV with header interaction,scribble_pixels,mean_dice,dice_0..dice_{K-1},epochs,ms
std::string csv_header(int num_classes);
std::string log_csv(const InteractionLog& log, int num_classes);
// Per interaction (0 = initial segmentation) the mean over sessions, with
// finished sessions carried forward.
std::string curve_csv(const std::vector<InteractionLog>& logs, int num_classes, int last_interaction);

// ---- experiments -----------------------------------------------------

struct ExperimentConfig {
  std::uint64_t seed = 7;
  int train_count = 200;
  int val_count = 50;
  synth::DatasetSpec data;
  TrainConfig train;
  SegNetConfig net;
  SessionConfig session;
  std::optional<std::filesystem::path> weights;  // skip pretraining
  std::optional<std::filesystem::path> cache_dir;
  std::vector<double> grid;  // ablation values
  int threads = 1;
  int max_cases = 0;  // 0 = all validation cases

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

inline const std::vector<std::string>& protocol_names() {
  static const std::vector<std::string> names = {
      "multiclass",   "missing_label",   "mismatch",
      "unseen_structure", "ablation_M", "ablation_l",
      "ablation_scribble_length", "ablation_input_mode"};
  return names;
}

// Loads `weights` if set; otherwise pretrains on the standard training
// split, caching the result in `cache_dir` when given.
std::shared_ptr<const Model> obtain_model(const ExperimentConfig& config);

std::string model_cache_key(const ExperimentConfig& config);

Dataset validation_set(const ExperimentConfig& config, synth::Distribution tag);

struct ExperimentReport {
  nlohmann::json summary;
  std::vector<std::pair<std::string, std::string>> files;  // relative name, contents
  void write(const std::filesystem::path& dir) const;
};

// Unknown names raise ValidationError "unknown_protocol".
ExperimentReport run_experiment(const std::string& protocol, const ExperimentConfig& config,
                                std::shared_ptr<const Model> model = nullptr);

// Cases of `data` where every pixel of class `label` is predicted as
// background.
std::vector<int> missing_structure_cases(const Dataset& data, const Model& model, int label);

}  // namespace ssn::harness
