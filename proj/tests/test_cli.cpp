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
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "ssn/image_io.hpp"
#include "ssn/refine.hpp"
#include "ssn/scribble.hpp"
#include "ssn/segnet.hpp"
#include "ssn/synth.hpp"

namespace ssn {
namespace {

namespace fs = std::filesystem;

const SegNetConfig kNet{.in_channels = 1, .num_classes = 4, .base_width = 3, .depth = 1};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ssn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    save_weights(init_model(kNet, 4), dir_ / "tiny.ssnw");
    synth::DatasetSpec spec;
    spec.count = 1;
    spec.height = spec.width = 16;
    image_io::write_image(dir_ / "img.pgm", synth::generate(spec, 1).front().image);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Exit status of `ssn <args>`; stderr lands in err.txt.
  int run(const std::string& args) {
    const std::string cmd = std::string(SSN_CLI) + " " + args + " > " + (dir_ / "out.txt").string() +
                            " 2> " + (dir_ / "err.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string err() const { return image_io::read_text(dir_ / "err.txt"); }
  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, GenDataWritesManifest) {
  ASSERT_EQ(run("gen-data --spec '{\"count\": 3, \"height\": 16, \"width\": 16}' --seed 5 --out " + p("data")), 0)
      << err();
  const auto manifest = nlohmann::json::parse(image_io::read_text(dir_ / "data" / "manifest.json"));
  EXPECT_EQ(manifest["images"].size(), 3u);
  EXPECT_EQ(manifest["seed"], 5);
  EXPECT_EQ(manifest["K"], 4);
}

TEST_F(Cli, SegmentWritesMask) {
  ASSERT_EQ(run("segment --weights " + p("tiny.ssnw") + " --image " + p("img.pgm") + " --out " + p("m.pgm")), 0)
      << err();
  const LabelMap mask = image_io::read_mask(dir_ / "m.pgm");
  EXPECT_EQ(mask, segment(load_weights(dir_ / "tiny.ssnw"), image_io::read_image(dir_ / "img.pgm")).labels);
}

TEST_F(Cli, ConsistentScribblesReproduceSegmentByteForByte) {
  ASSERT_EQ(run("segment --weights " + p("tiny.ssnw") + " --image " + p("img.pgm") + " --out " + p("seg.pgm")), 0);
  const LabelMap seg = image_io::read_mask(dir_ / "seg.pgm");
  const std::vector<Stroke> strokes = {{{{3, 3}}, seg.at(3, 3), 0}, {{{10, 12}}, seg.at(10, 12), 0}};
  image_io::write_text(dir_ / "s.json", strokes_to_json(strokes).dump());
  ASSERT_EQ(run("refine --weights " + p("tiny.ssnw") + " --image " + p("img.pgm") + " --scribbles " + p("s.json") +
                " --out " + p("ref.pgm") + " --report " + p("rep.json")),
            0)
      << err();
  EXPECT_EQ(image_io::read_file(dir_ / "seg.pgm"), image_io::read_file(dir_ / "ref.pgm"));
  const auto rep = nlohmann::json::parse(image_io::read_text(dir_ / "rep.json"));
  EXPECT_EQ(rep["epochs_run"], 0);
  EXPECT_TRUE(rep["satisfied"].get<bool>());
}

TEST_F(Cli, RefineSatisfiesViolatingScribble) {
  ASSERT_EQ(run("segment --weights " + p("tiny.ssnw") + " --image " + p("img.pgm") + " --out " + p("seg.pgm")), 0);
  const LabelMap seg = image_io::read_mask(dir_ / "seg.pgm");
  const int label = (seg.at(8, 8) + 1) % 4;
  image_io::write_text(dir_ / "s.json", strokes_to_json({{{{8, 7}, {8, 9}}, label, 0}}).dump());
  ASSERT_EQ(run("refine --weights " + p("tiny.ssnw") + " --image " + p("img.pgm") + " --scribbles " + p("s.json") +
                " --eta 0.2 --M 300 --out " + p("ref.pgm") + " --report " + p("rep.json")),
            0)
      << err();
  const LabelMap ref = image_io::read_mask(dir_ / "ref.pgm");
  const auto rep = nlohmann::json::parse(image_io::read_text(dir_ / "rep.json"));
  ASSERT_TRUE(rep["satisfied"].get<bool>());
  for (int x = 7; x <= 9; ++x) EXPECT_EQ(ref.at(8, x), label);
}

TEST_F(Cli, ExitCodesAndJsonErrors) {
  EXPECT_EQ(run("segment --weights " + p("missing.ssnw") + " --image " + p("img.pgm") + " --out " + p("m.pgm")), 2);
  const auto e = nlohmann::json::parse(err());
  EXPECT_EQ(e["error"]["code"], "cannot_read");
  EXPECT_EQ(run("eval --protocol nonsense --out " + p("ev")), 3);
  EXPECT_EQ(run("no-such-command"), 3);
  image_io::write_text(dir_ / "bad.json", "[{\"points\": [], \"label\": 1}]");
  EXPECT_EQ(run("refine --weights " + p("tiny.ssnw") + " --image " + p("img.pgm") + " --scribbles " + p("bad.json") +
                " --out " + p("r.pgm")),
            3);
  EXPECT_EQ(nlohmann::json::parse(err())["error"]["code"], "empty_stroke");
}

TEST_F(Cli, MismatchEvalWritesCurve) {
  const std::string cfg =
      "'{\"val_count\": 2, \"data\": {\"height\": 16, \"width\": 16}, \"refine\": {\"M\": 5}}'";
  ASSERT_EQ(run("eval --protocol mismatch --config " + cfg + " --weights " + p("tiny.ssnw") + " --out " + p("ev")), 0)
      << err();
  const std::string curve = image_io::read_text(dir_ / "ev" / "curve.csv");
  EXPECT_EQ(curve.substr(0, curve.find('\n')),
            "interaction,scribble_pixels,mean_dice,dice_0,dice_1,dice_2,dice_3,epochs,ms");
  const auto summary = nlohmann::json::parse(image_io::read_text(dir_ / "ev" / "summary.json"));
  EXPECT_EQ(summary["protocol"], "mismatch");
  EXPECT_TRUE(summary.contains("shifted_mean_dice_after_5"));
  EXPECT_TRUE(summary.contains("config"));
}

TEST_F(Cli, AblateWritesTable) {
  const std::string cfg = "'{\"val_count\": 2, \"data\": {\"height\": 16, \"width\": 16}}'";
  ASSERT_EQ(run("ablate --axis M --grid 1,5 --config " + cfg + " --weights " + p("tiny.ssnw") + " --out " + p("ab")), 0)
      << err();
  const std::string csv = image_io::read_text(dir_ / "ab" / "ablation.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "M,mean_dice,initial_mean_dice,painted_mean_dice,satisfied_fraction");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

}  // namespace
}  // namespace ssn
