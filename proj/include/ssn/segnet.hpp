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
#include <span>
#include <string>
#include <vector>

#include "ssn/dataset.hpp"
#include "ssn/tensor.hpp"

namespace ssn {

// Encoder-decoder with additive skip connections:
//
//   depth x [conv3x3 -> relu -> conv3x3 -> relu -> maxpool]
//   bottleneck conv3x3 -> relu -> conv3x3 -> relu
//   depth x [upsample2x -> conv3x3 -> (+ encoder features) -> relu]
//   conv1x1 -> K logits
//
// Every conv (weight + bias) is one parameter group; there are
// 3 * depth + 3 of them, ordered input to output.
struct SegNetConfig {
  int in_channels = 1;
  int num_classes = 4;
  int base_width = 8;
  int depth = 2;

  int group_count() const noexcept { return 3 * depth + 3; }
  int width_at(int level) const noexcept { return base_width << level; }
  // Throws ValidationError for non-positive sizes or K < 2.
  void validate() const;
  // Throws unless H and W are divisible by 2^depth and C matches.
  void validate_image(const Shape& image_shape) const;
  friend bool operator==(const SegNetConfig&, const SegNetConfig&) = default;
};

template <typename T>
struct ParamGroup {
  std::string name;
  BasicTensor<T> weight;  // [C_out, C_in, k, k]
  BasicTensor<T> bias;    // [C_out]

  std::size_t parameter_count() const noexcept { return weight.size() + bias.size(); }
  friend bool operator==(const ParamGroup&, const ParamGroup&) = default;
};

template <typename T>
struct BasicModel {
  SegNetConfig config;
  std::vector<ParamGroup<T>> groups;

  int layer_count() const noexcept { return static_cast<int>(groups.size()); }

  template <typename U>
  BasicModel<U> cast() const {
    BasicModel<U> m{config, {}};
    for (const auto& g : groups) {
      m.groups.push_back({g.name, g.weight.template cast<U>(), g.bias.template cast<U>()});
    }
    return m;
  }
  friend bool operator==(const BasicModel&, const BasicModel&) = default;
};

using Model = BasicModel<float>;
using Model64 = BasicModel<double>;

// Parameter groups by pointer, so instance weights can mix shared base
// groups with privately owned ones without copying.
template <typename T>
using GroupRefs = std::vector<const ParamGroup<T>*>;

template <typename T>
GroupRefs<T> group_refs(const BasicModel<T>& model) {
  GroupRefs<T> refs;
  for (const auto& g : model.groups) refs.push_back(&g);
  return refs;
}

// He-normal kernels (std = sqrt(2 / fan_in)) drawn in group order from a
// seeded Rng; zero biases.
Model init_model(const SegNetConfig& config, std::uint64_t seed);

// Activations kept for backward. Stage j is the conv of group j.
template <typename T>
struct ForwardTape {
  BasicTensor<T> image;
  std::vector<BasicTensor<T>> pooled;       // stage input when it is pooled, else empty
  std::vector<BasicTensor<T>> upsampled;    // stage input when it is upsampled, else empty
  std::vector<std::vector<int>> pool_argmax;
  std::vector<BasicTensor<T>> outputs;      // post-activation (logits for the head)
  int stages_done = 0;
};

// Runs stages [start_stage, N). Stages before start_stage are read from
// `tape`, which must come from an earlier call on the same image whose
// groups below start_stage are unchanged.
template <typename T>
BasicTensor<T> forward(const SegNetConfig& config, const GroupRefs<T>& groups,
                       const BasicTensor<T>& image, ForwardTape<T>& tape, int start_stage = 0);

template <typename T>
BasicTensor<T> forward(const BasicModel<T>& model, const BasicTensor<T>& image);

template <typename T>
struct GroupGrad {
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

// Reverse pass from d loss / d logits. Returns one entry per group; groups
// below `first_group` are left empty and no gradient flows past them.
template <typename T>
std::vector<GroupGrad<T>> backward(const SegNetConfig& config, const GroupRefs<T>& groups,
                                   const ForwardTape<T>& tape, const BasicTensor<T>& grad_logits,
                                   int first_group = 0);

struct TrainConfig {
  int epochs = 30;
  double learning_rate = 0.1;
  int batch_size = 4;
  std::uint64_t seed = 7;
  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0;       // mean pixel cross-entropy over the epoch
  double mean_dice = 0;  // mean over images of the class-averaged dice
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> curve;
};

// Plain minibatch SGD on full-image pixel cross-entropy. Shuffle order
// comes from `config.seed`. Predictions used for the epoch dice are the
// ones computed before each update.
TrainResult pretrain(Model model, std::span<const Sample> data, const TrainConfig& config);

std::string training_curve_csv(const std::vector<EpochStats>& curve);

// ---- weight files ----------------------------------------------------
//
//   "SSNW" | u32 version (1) | u32 tensor count |
//   per tensor: u16 name length | name bytes | u8 ndim | u32 dims[ndim] |
//               f32 payload
//
// All integers and floats little-endian.

struct NamedTensor {
  std::string name;
  Tensor tensor;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

inline constexpr std::uint32_t kWeightFileVersion = 1;

std::vector<std::uint8_t> encode_weight_file(const std::vector<NamedTensor>& tensors);
// Errors carry codes "bad_magic", "version_mismatch", "truncated" and
// "dimension_overflow".
std::vector<NamedTensor> decode_weight_file(std::span<const std::uint8_t> bytes);

void write_weight_file(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_weight_file(const std::filesystem::path& path);

std::vector<NamedTensor> model_tensors(const Model& model);
// Rebuilds a model, inferring the architecture from tensor shapes.
Model model_from_tensors(const std::vector<NamedTensor>& tensors);

void save_weights(const Model& model, const std::filesystem::path& path);
Model load_weights(const std::filesystem::path& path);

}  // namespace ssn
