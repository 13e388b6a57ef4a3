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

#include <vector>

#include "ssn/tensor.hpp"

namespace ssn {

// One image [C,H,W] with values in [0,1] and its ground-truth label map.
struct Sample {
  Tensor image;
  LabelMap gt;
};

using Dataset = std::vector<Sample>;

}  // namespace ssn
