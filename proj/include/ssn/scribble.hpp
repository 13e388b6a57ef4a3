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
#include <map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssn/ops.hpp"
#include "ssn/tensor.hpp"

namespace ssn {

struct Point {
  int row = 0;
  int col = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

// A user stroke before rasterization.
struct Stroke {
  std::vector<Point> points;
  int label = 0;
  int radius = 0;
  friend bool operator==(const Stroke&, const Stroke&) = default;
};

// Sparse pixel -> class constraint set. Keys are flat row-major pixel
// indices, so iteration is in row-major order.
class ScribbleMask {
 public:
  ScribbleMask() = default;
  ScribbleMask(int height, int width) : height_(height), width_(width) {}

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::map<int, std::uint8_t>& entries() const noexcept { return entries_; }

  // Overwrites any previous label of the pixel. Throws on out-of-bounds.
  void set(int row, int col, int label);
  bool contains(int row, int col) const { return entries_.count(row * width_ + col) > 0; }
  int label_at(int row, int col) const;  // -1 when unlabeled

  // Union; entries of `later` win on conflict.
  void merge(const ScribbleMask& later);

  std::vector<ops::LabeledPixel> pixels() const;
  friend bool operator==(const ScribbleMask&, const ScribbleMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::map<int, std::uint8_t> entries_;
};

// Each polyline segment is stepped with Bresenham's algorithm; every
// stepped pixel is dilated by a disc of the stroke radius. Strokes are
// applied in order, so later strokes overwrite earlier ones.
// Throws "point_out_of_bounds", "label_out_of_range" or "empty_stroke".
ScribbleMask rasterize(const std::vector<Stroke>& strokes, int height, int width,
                       int num_classes = 256);

struct RegionGrowConfig {
  double threshold = 0.05;  // T, in [0,1] intensity units
  int max_pixels = 500;     // growth cap per 4-connected seed component
};

// Breadth-first growth from all scribble pixels at once. A frontier pixel
// p admits an unlabeled 4-neighbour q when max_c |I_c(q) - I_c(p)| < T;
// q takes p's label. Seeds enter the FIFO queue in row-major order and the
// first arrival wins. Seed pixels are never relabeled.
ScribbleMask region_grow(const Tensor& image, const ScribbleMask& mask,
                         const RegionGrowConfig& config);

// [{"points": [[r,c],...], "label": int, "radius": int}, ...]
std::vector<Stroke> strokes_from_json(const nlohmann::json& j);
nlohmann::json strokes_to_json(const std::vector<Stroke>& strokes);

// {"height": h, "width": w, "pixels": [[r,c,label],...]}
nlohmann::json mask_to_json(const ScribbleMask& mask);
ScribbleMask mask_from_json(const nlohmann::json& j);

// Class index per pixel, 255 where unlabeled.
LabelMap mask_overlay(const ScribbleMask& mask);

}  // namespace ssn
