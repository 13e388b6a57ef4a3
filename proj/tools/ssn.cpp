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
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ssn/harness.hpp"
#include "ssn/image_io.hpp"
#include "ssn/service.hpp"

using namespace ssn;
namespace fs = std::filesystem;

namespace {

// Accepts either a path to a JSON file or inline JSON text.
nlohmann::json load_json(const std::string& arg) {
  if (arg.empty()) return nlohmann::json::object();
  const std::string text = fs::is_regular_file(arg) ? image_io::read_text(arg) : arg;
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid_json", "cannot parse '" + arg + "': " + e.what());
  }
}

// "1..9" or "10,25,50".
std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  if (s.empty()) return out;
  try {
    if (const auto dots = s.find(".."); dots != std::string::npos) {
      const int lo = std::stoi(s.substr(0, dots)), hi = std::stoi(s.substr(dots + 2));
      if (hi < lo) throw ValidationError("invalid_grid", "empty range " + s);
      for (int v = lo; v <= hi; ++v) out.push_back(v);
      return out;
    }
    std::size_t pos = 0;
    while (pos <= s.size()) {
      const auto comma = s.find(',', pos);
      out.push_back(std::stod(s.substr(pos, comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  } catch (const std::logic_error&) {
    throw ValidationError("invalid_grid", "cannot parse grid '" + s + "'");
  }
  return out;
}

struct Common {
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool timing = false;
};

harness::ExperimentConfig experiment_config(const std::string& config_arg, const Common& common) {
  auto c = harness::ExperimentConfig::from_json(load_json(config_arg));
  if (common.seed) {
    c.seed = *common.seed;
    c.train.seed = *common.seed;
    c.session.oracle.seed = *common.seed;
  }
  c.threads = common.threads;
  c.session.record_timing = common.timing;
  return c;
}

int print_error(const std::string& code, const std::string& message, int exit_code) {
  std::cerr << nlohmann::json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scribble-guided refinement for segmentation networks"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&common](CLI::App* cmd) {
    cmd->add_option("--seed", common.seed, "Seed for all randomness");
    cmd->add_option("--threads", common.threads, "Worker threads across suite cases")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--timing", common.timing, "Record wall-clock times in outputs");
  };

  // gen-data
  std::string spec_arg, out;
  std::uint64_t data_seed = 7;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--spec", spec_arg, "Dataset spec JSON (file or inline)");
  gen->add_option("--seed", data_seed, "Generation seed");
  gen->add_option("--out", out, "Output directory")->required();

  // pretrain
  std::string data_dir, config_arg, curve_out;
  auto* pre = app.add_subcommand("pretrain", "Pretrain the segmentation network");
  pre->add_option("--data", data_dir, "Dataset directory from gen-data")->required();
  pre->add_option("--config", config_arg, "Experiment config JSON (train/net sections)");
  pre->add_option("--out", out, "Output weight file")->required();
  pre->add_option("--curve", curve_out, "Training curve CSV");
  add_common(pre);

  // segment
  std::string weights, image_path;
  auto* seg = app.add_subcommand("segment", "Segment one image");
  seg->add_option("--weights", weights, "Weight file")->required();
  seg->add_option("--image", image_path, "PGM/PPM image")->required();
  seg->add_option("--out", out, "Output mask PGM")->required();

  // refine
  std::string scribbles_arg, report_out, mode;
  bool grow = false;
  double threshold = RegionGrowConfig{}.threshold;
  RefineConfig rc;
  auto* ref = app.add_subcommand("refine", "Refine a segmentation with scribbles");
  ref->add_option("--weights", weights, "Weight file")->required();
  ref->add_option("--image", image_path, "PGM/PPM image")->required();
  ref->add_option("--scribbles", scribbles_arg, "Stroke JSON (file or inline)")->required();
  ref->add_flag("--region-grow", grow, "Grow scribbles before refining");
  ref->add_option("--T", threshold, "Region-growing threshold");
  ref->add_option("--mode", mode, "paper or direct");
  ref->add_option("--eta", rc.learning_rate, "Learning rate");
  ref->add_option("--alpha", rc.alpha, "Proximal weight");
  ref->add_option("--M", rc.max_epochs, "Max epochs");
  ref->add_option("--l", rc.trainable_layers, "Trainable final groups");
  ref->add_option("--out", out, "Output mask PGM")->required();
  ref->add_option("--report", report_out, "RefineReport JSON");
  add_common(ref);

  // eval
  std::string protocol, cache_dir, weights_opt;
  auto* ev = app.add_subcommand("eval", "Run an experiment protocol");
  ev->add_option("--protocol", protocol, "Protocol name")
      ->required()
      ->check(CLI::IsMember(harness::protocol_names()));
  ev->add_option("--config", config_arg, "Experiment config JSON");
  ev->add_option("--weights", weights_opt, "Use these weights instead of pretraining");
  ev->add_option("--cache-dir", cache_dir, "Cache pretrained weights here");
  ev->add_option("--out", out, "Output directory")->required();
  add_common(ev);

  // ablate
  std::string axis, grid;
  auto* ab = app.add_subcommand("ablate", "Run an ablation sweep");
  ab->add_option("--axis", axis, "M, l, scribble-length or input-mode")
      ->required()
      ->check(CLI::IsMember({"M", "l", "scribble-length", "input-mode"}));
  ab->add_option("--grid", grid, "Values: 'a..b' or 'v1,v2,...'");
  ab->add_option("--config", config_arg, "Experiment config JSON");
  ab->add_option("--weights", weights_opt, "Use these weights instead of pretraining");
  ab->add_option("--cache-dir", cache_dir, "Cache pretrained weights here");
  ab->add_option("--out", out, "Output directory")->required();
  add_common(ab);

  // serve
  int port = 8080;
  int ttl = 1800;
  std::string models_dir, host = "127.0.0.1";
  auto* srv = app.add_subcommand("serve", "Run the HTTP session service");
  srv->add_option("--port", port, "TCP port");
  srv->add_option("--host", host, "Bind address");
  srv->add_option("--models-dir", models_dir, "Directory of weight files")->required();
  srv->add_option("--session-ttl", ttl, "Idle session lifetime in seconds");
  srv->add_option("--seed", data_seed, "Session id and dataset seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return print_error("invalid_arguments", e.what(), 3);
  }

  try {
    if (*gen) {
      auto spec = synth::DatasetSpec::from_json(load_json(spec_arg));
      synth::write_dataset(out, synth::generate(spec, data_seed), spec, data_seed);
    } else if (*pre) {
      auto c = experiment_config(config_arg, common);
      const auto data = synth::read_dataset(data_dir);
      if (data.samples.empty()) throw ValidationError("empty_dataset", "no samples in " + data_dir);
      SegNetConfig net = c.net;
      net.in_channels = data.samples.front().image.dim(0);
      net.num_classes = data.num_classes;
      auto result = pretrain(init_model(net, c.seed), data.samples, c.train);
      save_weights(result.model, out);
      if (!curve_out.empty()) image_io::write_text(curve_out, training_curve_csv(result.curve));
    } else if (*seg) {
      const Model model = load_weights(weights);
      image_io::write_mask(out, segment(model, image_io::read_image(image_path)).labels);
    } else if (*ref) {
      auto model = std::make_shared<const Model>(load_weights(weights));
      const Tensor image = image_io::read_image(image_path);
      nlohmann::json sj = load_json(scribbles_arg);
      if (sj.is_object() && sj.contains("strokes")) sj = sj["strokes"];
      ScribbleMask mask = rasterize(strokes_from_json(sj), image.dim(1), image.dim(2),
                                    model->config.num_classes);
      if (grow) mask = region_grow(image, mask, {threshold, RegionGrowConfig{}.max_pixels});
      if (!mode.empty()) rc.mode = refine_mode_from_string(mode);
      try {
        auto outcome = refine(image, mask, model, rc);
        image_io::write_mask(out, outcome.segmentation.labels);
        if (!report_out.empty()) {
          image_io::write_text(report_out, outcome.report.to_json(common.timing).dump(2) + "\n");
        }
      } catch (const RefineAborted& e) {
        if (!report_out.empty()) {
          image_io::write_text(report_out, e.report().to_json(common.timing).dump(2) + "\n");
        }
        throw;
      }
    } else if (*ev || *ab) {
      auto c = experiment_config(config_arg, common);
      if (!weights_opt.empty()) c.weights = weights_opt;
      if (!cache_dir.empty()) c.cache_dir = cache_dir;
      std::string name = protocol;
      if (*ab) {
        c.grid = parse_grid(grid);
        name = axis == "M"                ? "ablation_M"
               : axis == "l"              ? "ablation_l"
               : axis == "scribble-length" ? "ablation_scribble_length"
                                           : "ablation_input_mode";
        if (axis == "input-mode" && !c.grid.empty()) {
          throw ValidationError("invalid_grid", "input-mode takes no grid");
        }
      }
      harness::run_experiment(name, c).write(out);
    } else if (*srv) {
      service::ServiceConfig sc;
      sc.models_dir = models_dir;
      sc.session_ttl = std::chrono::seconds(ttl);
      sc.seed = data_seed;
      service::SessionService svc(sc);
      for (const auto& f : svc.scan_models()) std::cerr << "skipping unreadable model " << f << "\n";
      std::cerr << "listening on " << host << ":" << port << "\n";
      service::serve(svc, host, port);
    }
  } catch (const IoError& e) {
    return print_error(e.code(), e.what(), 2);
  } catch (const NumericalError& e) {
    return print_error(e.code(), e.what(), 4);
  } catch (const Error& e) {
    return print_error(e.code(), e.what(), 3);
  } catch (const nlohmann::json::exception& e) {
    return print_error("invalid_json", e.what(), 3);
  } catch (const std::filesystem::filesystem_error& e) {
    return print_error("io_error", e.what(), 2);
  } catch (const std::exception& e) {
    return print_error("internal_error", e.what(), 1);
  }
  return 0;
}
