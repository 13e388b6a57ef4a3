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

#include <span>
#include <vector>

#include "ssn/tensor.hpp"

namespace ssn {

// 2|A n B| / (|A| + |B|) for class c; 1 when class c is absent from both.
double dice(const LabelMap& a, const LabelMap& b, int c);

std::vector<double> per_class_dice(const LabelMap& a, const LabelMap& b, int num_classes);

// Unweighted mean of per_class_dice over all K classes.
double mean_dice(const LabelMap& a, const LabelMap& b, int num_classes);

double median(std::vector<double> values);
// Linear-interpolated quantile, q in [0,1].
double quantile(std::vector<double> values, double q);

}  // namespace ssn
