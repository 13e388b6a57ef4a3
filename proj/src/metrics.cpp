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
#include "ssn/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace ssn {

double dice(const LabelMap& a, const LabelMap& b, int c) {
  if (a.height != b.height || a.width != b.width) {
    throw ValidationError("shape_mismatch", "dice needs label maps of equal size");
  }
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool ia = a.labels[i] == c, ib = b.labels[i] == c;
    na += ia;
    nb += ib;
    both += ia && ib;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

std::vector<double> per_class_dice(const LabelMap& a, const LabelMap& b, int num_classes) {
  std::vector<double> d(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) d[c] = dice(a, b, c);
  return d;
}

double mean_dice(const LabelMap& a, const LabelMap& b, int num_classes) {
  const auto d = per_class_dice(a, b, num_classes);
  double s = 0;
  for (double v : d) s += v;
  return s / static_cast<double>(num_classes);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

}  // namespace ssn
