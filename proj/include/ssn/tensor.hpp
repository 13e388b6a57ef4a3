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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ssn/error.hpp"

namespace ssn {

using Shape = std::vector<int>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

// Dense row-major array. Dimensions are positive; the flat payload
// always holds exactly product(shape) elements.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0))
      : shape_(checked(std::move(shape))), data_(element_count(shape_), fill) {}
  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(checked(std::move(shape))), data_(std::move(data)) {
    if (data_.size() != element_count(shape_)) {
      throw ValidationError("shape_mismatch", "tensor payload of " + std::to_string(data_.size()) +
                                                  " elements does not match shape " +
                                                  to_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  // [C,H,W] accessors.
  T& at(int c, int y, int x) noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  const T& at(int c, int y, int x) const noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool all_finite() const noexcept {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) = default;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

 private:
  static Shape checked(Shape shape) {
    for (int d : shape) {
      if (d <= 0) {
        throw ValidationError("shape_mismatch", "tensor dimensions must be positive, got " +
                                                    to_string(shape));
      }
    }
    return shape;
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Throws NumericalError naming `what` if any element is NaN or Inf.
template <typename T>
void require_finite(const BasicTensor<T>& t, const char* what) {
  if (!t.all_finite()) {
    throw NumericalError("non_finite", std::string(what) + " contains NaN or Inf");
  }
}

// Dense per-pixel class map, row-major.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t size() const noexcept { return labels.size(); }
  std::uint8_t& at(int y, int x) noexcept { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const noexcept {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

}  // namespace ssn
