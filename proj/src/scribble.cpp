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
#include "ssn/scribble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>

namespace ssn {

void ScribbleMask::set(int row, int col, int label) {
  if (row < 0 || col < 0 || row >= height_ || col >= width_) {
    throw ValidationError("point_out_of_bounds", "scribble pixel (" + std::to_string(row) + "," +
                                                     std::to_string(col) + ") outside " +
                                                     std::to_string(height_) + "x" +
                                                     std::to_string(width_) + " image");
  }
  if (label < 0 || label > 254) {
    throw ValidationError("label_out_of_range", "scribble label " + std::to_string(label));
  }
  entries_[row * width_ + col] = static_cast<std::uint8_t>(label);
}

int ScribbleMask::label_at(int row, int col) const {
  auto it = entries_.find(row * width_ + col);
  return it == entries_.end() ? -1 : it->second;
}

void ScribbleMask::merge(const ScribbleMask& later) {
  if (later.height_ != height_ || later.width_ != width_) {
    throw ValidationError("shape_mismatch", "cannot merge scribble masks of different sizes");
  }
  for (const auto& [idx, label] : later.entries_) entries_[idx] = label;
}

std::vector<ops::LabeledPixel> ScribbleMask::pixels() const {
  std::vector<ops::LabeledPixel> out;
  out.reserve(entries_.size());
  for (const auto& [idx, label] : entries_) out.push_back({idx, label});
  return out;
}

ScribbleMask rasterize(const std::vector<Stroke>& strokes, int height, int width,
                       int num_classes) {
  ScribbleMask mask(height, width);
  for (const Stroke& s : strokes) {
    if (s.points.empty()) throw ValidationError("empty_stroke", "stroke has no points");
    if (s.label < 0 || s.label >= num_classes) {
      throw ValidationError("label_out_of_range", "stroke label " + std::to_string(s.label) +
                                                      " >= K=" + std::to_string(num_classes));
    }
    if (s.radius < 0) throw ValidationError("invalid_radius", "stroke radius must be >= 0");
    for (const Point& p : s.points) {
      if (p.row < 0 || p.col < 0 || p.row >= height || p.col >= width) {
        throw ValidationError("point_out_of_bounds",
                              "stroke point (" + std::to_string(p.row) + "," +
                                  std::to_string(p.col) + ") outside image");
      }
    }
    const int r = s.radius;
    auto stamp = [&](int y, int x) {
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          if (dy * dy + dx * dx > r * r) continue;
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && xx >= 0 && yy < height && xx < width) mask.set(yy, xx, s.label);
        }
    };
    stamp(s.points[0].row, s.points[0].col);
    for (std::size_t i = 1; i < s.points.size(); ++i) {
      int y = s.points[i - 1].row, x = s.points[i - 1].col;
      const int y1 = s.points[i].row, x1 = s.points[i].col;
      const int dx = std::abs(x1 - x), dy = -std::abs(y1 - y);
      const int sx = x < x1 ? 1 : -1, sy = y < y1 ? 1 : -1;
      int err = dx + dy;
      for (;;) {
        stamp(y, x);
        if (y == y1 && x == x1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
          err += dy;
          x += sx;
        }
        if (e2 <= dx) {
          err += dx;
          y += sy;
        }
      }
    }
  }
  return mask;
}

ScribbleMask region_grow(const Tensor& image, const ScribbleMask& mask,
                         const RegionGrowConfig& config) {
  if (!std::isfinite(config.threshold) || config.threshold < 0) {
    throw ValidationError("invalid_threshold", "region growing threshold must be finite and >= 0");
  }
  if (image.rank() != 3 || image.dim(1) != mask.height() || image.dim(2) != mask.width()) {
    throw ValidationError("shape_mismatch", "image and scribble mask sizes differ");
  }
  const int h = mask.height(), w = mask.width(), c = image.dim(0);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<int> label(plane, -1), component(plane, -1);
  for (const auto& [idx, l] : mask.entries()) label[idx] = l;

  // Seed components: 4-connected runs of equal label.
  std::vector<int> budget;
  for (const auto& [idx, l] : mask.entries()) {
    if (component[idx] >= 0) continue;
    const int id = static_cast<int>(budget.size());
    budget.push_back(config.max_pixels);
    std::vector<int> stack{idx};
    component[idx] = id;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int py = p / w, px = p % w;
      const int nb[4][2] = {{py - 1, px}, {py + 1, px}, {py, px - 1}, {py, px + 1}};
      for (const auto& n : nb) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= h || n[1] >= w) continue;
        const int q = n[0] * w + n[1];
        if (component[q] < 0 && label[q] == l) {
          component[q] = id;
          stack.push_back(q);
        }
      }
    }
  }

  auto distance = [&](int p, int q) {
    float d = 0;
    for (int ch = 0; ch < c; ++ch) d = std::max(d, std::abs(image[ch * plane + q] - image[ch * plane + p]));
    return d;
  };

  ScribbleMask out = mask;
  std::deque<int> queue;
  for (const auto& [idx, l] : mask.entries()) queue.push_back(idx);
  const auto threshold = static_cast<float>(config.threshold);
  while (!queue.empty()) {
    const int p = queue.front();
    queue.pop_front();
    const int py = p / w, px = p % w;
    const int nb[4][2] = {{py - 1, px}, {py + 1, px}, {py, px - 1}, {py, px + 1}};
    for (const auto& n : nb) {
      if (n[0] < 0 || n[1] < 0 || n[0] >= h || n[1] >= w) continue;
      const int q = n[0] * w + n[1];
      if (label[q] >= 0 || budget[component[p]] <= 0) continue;
      if (!(distance(p, q) < threshold)) continue;
      label[q] = label[p];
      component[q] = component[p];
      --budget[component[p]];
      out.set(n[0], n[1], label[p]);
      queue.push_back(q);
    }
  }
  return out;
}

std::vector<Stroke> strokes_from_json(const nlohmann::json& j) {
  auto bad = [](const std::string& why) { return ValidationError("invalid_strokes", why); };
  if (!j.is_array()) throw bad("strokes must be a JSON array");
  std::vector<Stroke> out;
  for (const auto& s : j) {
    if (!s.is_object() || !s.contains("points") || !s.contains("label")) {
      throw bad("each stroke needs \"points\" and \"label\"");
    }
    Stroke st;
    try {
      st.label = s.at("label").get<int>();
      st.radius = s.value("radius", 0);
      for (const auto& p : s.at("points")) {
        if (!p.is_array() || p.size() != 2) throw bad("points must be [row, col] pairs");
        st.points.push_back({p[0].get<int>(), p[1].get<int>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw bad(std::string("malformed stroke: ") + e.what());
    }
    if (st.points.empty()) throw ValidationError("empty_stroke", "stroke has no points");
    out.push_back(std::move(st));
  }
  return out;
}

nlohmann::json strokes_to_json(const std::vector<Stroke>& strokes) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Stroke& s : strokes) {
    nlohmann::json pts = nlohmann::json::array();
    for (const Point& p : s.points) pts.push_back({p.row, p.col});
    arr.push_back({{"points", pts}, {"label", s.label}, {"radius", s.radius}});
  }
  return arr;
}

nlohmann::json mask_to_json(const ScribbleMask& mask) {
  nlohmann::json px = nlohmann::json::array();
  for (const auto& [idx, l] : mask.entries()) px.push_back({idx / mask.width(), idx % mask.width(), l});
  return {{"height", mask.height()}, {"width", mask.width()}, {"pixels", px}};
}

ScribbleMask mask_from_json(const nlohmann::json& j) {
  try {
    ScribbleMask m(j.at("height").get<int>(), j.at("width").get<int>());
    for (const auto& p : j.at("pixels")) m.set(p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<int>());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid_mask", std::string("malformed scribble mask: ") + e.what());
  }
}

LabelMap mask_overlay(const ScribbleMask& mask) {
  LabelMap out(mask.height(), mask.width(), 255);
  for (const auto& [idx, l] : mask.entries()) out.labels[idx] = l;
  return out;
}

}  // namespace ssn
