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
#include "ssn/oracle.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>

namespace ssn {
namespace {

// BFS distances inside `member` (flag per pixel) from `source`.
std::vector<int> bfs(const std::vector<char>& member, int h, int w, int source) {
  std::vector<int> dist(member.size(), -1);
  std::deque<int> q{source};
  dist[source] = 0;
  while (!q.empty()) {
    const int p = q.front();
    q.pop_front();
    const int py = p / w, px = p % w;
    const int nb[4][2] = {{py - 1, px}, {py + 1, px}, {py, px - 1}, {py, px + 1}};
    for (const auto& n : nb) {
      if (n[0] < 0 || n[1] < 0 || n[0] >= h || n[1] >= w) continue;
      const int qi = n[0] * w + n[1];
      if (member[qi] && dist[qi] < 0) {
        dist[qi] = dist[p] + 1;
        q.push_back(qi);
      }
    }
  }
  return dist;
}

int farthest(const std::vector<int>& dist, const std::vector<int>& candidates) {
  int best = candidates.front();
  for (int c : candidates) {
    if (dist[c] > dist[best]) best = c;
  }
  return best;
}

std::vector<Point> line(Point a, Point b) {
  std::vector<Point> out;
  int y = a.row, x = a.col;
  const int dx = std::abs(b.col - x), dy = -std::abs(b.row - y);
  const int sx = x < b.col ? 1 : -1, sy = y < b.row ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    out.push_back({y, x});
    if (y == b.row && x == b.col) break;
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
  return out;
}

}  // namespace

void OracleConfig::validate() const {
  if (max_strokes < 0 || length < 1) {
    throw ValidationError("invalid_config", "oracle needs k >= 0 and L >= 1");
  }
}

std::vector<ErrorComponent> error_components(const LabelMap& pred, const LabelMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw ValidationError("shape_mismatch", "prediction and ground truth sizes differ");
  }
  const int h = gt.height, w = gt.width;
  std::vector<char> seen(gt.size(), 0);
  std::vector<ErrorComponent> comps;
  for (int start = 0; start < static_cast<int>(gt.size()); ++start) {
    if (seen[start] || pred.labels[start] == gt.labels[start]) continue;
    ErrorComponent c;
    c.label = gt.labels[start];
    c.anchor = start;
    std::vector<int> stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      c.pixels.push_back(p);
      const int py = p / w, px = p % w;
      const int nb[4][2] = {{py - 1, px}, {py + 1, px}, {py, px - 1}, {py, px + 1}};
      for (const auto& n : nb) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= h || n[1] >= w) continue;
        const int q = n[0] * w + n[1];
        if (!seen[q] && pred.labels[q] != gt.labels[q] && gt.labels[q] == c.label) {
          seen[q] = 1;
          stack.push_back(q);
        }
      }
    }
    std::sort(c.pixels.begin(), c.pixels.end());
    comps.push_back(std::move(c));
  }
  std::stable_sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
    if (a.pixels.size() != b.pixels.size()) return a.pixels.size() > b.pixels.size();
    return a.anchor < b.anchor;
  });
  return comps;
}

std::vector<Stroke> next_scribbles(const LabelMap& pred, const LabelMap& gt,
                                   const OracleConfig& config) {
  config.validate();
  const auto comps = error_components(pred, gt);
  const int h = gt.height, w = gt.width;
  std::vector<Stroke> strokes;
  for (std::size_t ci = 0; ci < comps.size() && static_cast<int>(ci) < config.max_strokes; ++ci) {
    const ErrorComponent& c = comps[ci];
    std::vector<char> member(gt.size(), 0);
    for (int p : c.pixels) member[p] = 1;
    std::vector<int> interior;
    for (int p : c.pixels) {
      const int py = p / w, px = p % w;
      const bool inside = py > 0 && px > 0 && py < h - 1 && px < w - 1 && member[p - w] &&
                          member[p + w] && member[p - 1] && member[p + 1];
      if (inside) interior.push_back(p);
    }
    if (interior.empty()) interior = c.pixels;

    const int a = farthest(bfs(member, h, w, interior.front()), interior);
    const int b = farthest(bfs(member, h, w, a), interior);
    const auto path = line({a / w, a % w}, {b / w, b % w});

    // Longest run of the line inside the component.
    std::size_t best_start = 0, best_len = 0;
    for (std::size_t i = 0; i < path.size();) {
      if (!member[path[i].row * w + path[i].col]) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < path.size() && member[path[j].row * w + path[j].col]) ++j;
      if (j - i > best_len) {
        best_start = i;
        best_len = j - i;
      }
      i = j;
    }
    const auto length = static_cast<std::size_t>(config.length);
    if (best_len > length) {
      best_start += (best_len - length) / 2;
      best_len = length;
    }
    Stroke s;
    s.label = c.label;
    s.points.assign(path.begin() + static_cast<std::ptrdiff_t>(best_start),
                    path.begin() + static_cast<std::ptrdiff_t>(best_start + best_len));
    strokes.push_back(std::move(s));
  }
  return strokes;
}

}  // namespace ssn
