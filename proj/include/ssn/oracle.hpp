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
#include <vector>

#include "ssn/scribble.hpp"

namespace ssn {

struct OracleConfig {
  int max_strokes = 2;  // k
  int length = 10;      // L, pixels per stroke
  std::uint64_t seed = 0;
  void validate() const;
};

// Simulated annotator. Error pixels (pred != gt) are grouped into
// 4-connected components of constant ground-truth label, ordered by size
// (descending, ties by row-major first pixel). For each of the first k
// components it finds a far-apart pair of interior pixels (double BFS
// sweep inside the component; interior = all four neighbours in the
// component, or the whole component if none are), draws the straight line
// between them, keeps the longest run of that line inside the component
// and trims it to L pixels around its middle. Every stroke pixel is listed
// as a point, radius 0, labeled with the component's gt class.
std::vector<Stroke> next_scribbles(const LabelMap& pred, const LabelMap& gt,
                                   const OracleConfig& config);

struct ErrorComponent {
  int label = 0;
  int anchor = 0;            // smallest flat index
  std::vector<int> pixels;   // flat indices, row-major
};

// Error components in oracle order (largest first).
std::vector<ErrorComponent> error_components(const LabelMap& pred, const LabelMap& gt);

}  // namespace ssn
