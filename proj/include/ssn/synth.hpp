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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssn/dataset.hpp"

// Synthetic multi-class scenes: background, an "organ" ellipse, "tumor"
// blobs inside the organ and a "vessel" curve, rendered with per-class
// intensities, a linear bias field and Gaussian noise.
namespace ssn::synth {

enum class Distribution {
  kA,            // training distribution
  kShifted,      // intensity shift + contrast change of A
  kUnseenShape,  // A without tumors plus a dark rectangle labeled class 2
};

std::string to_string(Distribution d);
Distribution distribution_from_string(const std::string& s);

inline constexpr int kBackground = 0;
inline constexpr int kOrgan = 1;
inline constexpr int kTumor = 2;
inline constexpr int kVessel = 3;

struct DatasetSpec {
  int count = 200;
  int height = 64;
  int width = 64;
  int num_classes = 4;  // 2..4: the first K structures are drawn
  std::vector<double> class_means = {0.2, 0.5, 0.7, 0.92};
  double noise_sigma = 0.01;    // per-pixel white noise
  double texture_sigma = 0.07;  // smooth spatially correlated noise
  int texture_radius = 4;       // box-blur radius of the texture field
  double tumor_spread = 0.06;   // per-sample tumor mean drawn from class mean +- spread
  double bias_amplitude = 0.1;
  Distribution tag = Distribution::kA;
  double shift = 0.15;     // kShifted: I' = 0.5 + contrast * (I - 0.5) + shift
  double contrast = 0.6;
  double rect_mean = 0.03; // kUnseenShape rectangle intensity
  int first_index = 0;     // offset into the seeded sample stream

  void validate() const;
  nlohmann::json to_json() const;
  static DatasetSpec from_json(const nlohmann::json& j);
};

// Sample i is drawn from derive_seed(seed, first_index + i), so ranges of
// indices from one seed never overlap.
Dataset generate(const DatasetSpec& spec, std::uint64_t seed);

// Standard split: train = indices [0, train_count), validation follows.
struct Split {
  Dataset train;
  Dataset validation;
};
Split standard_split(DatasetSpec spec, std::uint64_t seed, int train_count, int val_count);

// Pixel count per class over the whole dataset.
std::vector<std::uint64_t> class_histogram(const Dataset& data, int num_classes);

// image_XXX.pgm / mask_XXX.pgm plus manifest.json:
//   {"images": [...], "masks": [...], "K": int, "tag": str, "seed": int}
void write_dataset(const std::filesystem::path& dir, const Dataset& data, const DatasetSpec& spec,
                   std::uint64_t seed);

struct LoadedDataset {
  Dataset samples;
  int num_classes = 0;
  std::string tag;
  std::uint64_t seed = 0;
};
LoadedDataset read_dataset(const std::filesystem::path& dir);

}  // namespace ssn::synth
