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

#include <optional>
#include <span>
#include <vector>

#include "ssn/tensor.hpp"

// Forward operations and their explicit reverse-mode gradients. Layout
// is [C,H,W] throughout. Every reduction runs in a fixed order, so
// results are bit-identical between runs and threads.
namespace ssn::ops {

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;   // empty when not requested
  BasicTensor<T> kernel;
  BasicTensor<T> bias;
};

// Saved state of one conv2d_forward call.
template <typename T>
struct Conv2dContext {
  BasicTensor<T> input;
  BasicTensor<T> kernel;
  Shape output_shape;
  bool valid() const noexcept { return !input.empty() && !kernel.empty(); }
};

// Stride-1 cross-correlation with zero padding (k-1)/2; k must be odd.
// Each output element starts at its bias and accumulates input channels
// in order, each channel's kernel window in row-major order.
// kernel: [C_out, C_in, k, k], bias: [C_out].
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                              const BasicTensor<T>& bias, Conv2dContext<T>* context = nullptr);

// Gradients of conv2d_forward given the cotangent of its output.
template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                             const BasicTensor<T>& grad_out, bool want_input_grad = true);

// Same, from a saved context. Throws "missing_context" for an empty
// context and "stale_context" when grad_out does not match the cached
// output shape.
template <typename T>
ConvGrads<T> conv2d_backward(const Conv2dContext<T>& context, const BasicTensor<T>& grad_out,
                             bool want_input_grad = true);

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& x);

// `activation` may be either the relu input or its output; both give the
// same mask (gradient is zero at exactly 0).
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& activation, const BasicTensor<T>& grad_out);

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  std::vector<int> argmax;  // flat input index of each output element
};

// 2x2 max pooling, stride 2. Ties go to the first element of the window
// in row-major order. Odd spatial dimensions are rejected.
template <typename T>
PoolResult<T> maxpool2x2_forward(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> maxpool2x2_backward(const std::vector<int>& argmax, const Shape& input_shape,
                                   const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> upsample2x_nearest_forward(const BasicTensor<T>& x);

// Sums each 2x2 block of the cotangent.
template <typename T>
BasicTensor<T> upsample2x_nearest_backward(const BasicTensor<T>& grad_out);

// Per-pixel softmax across channels, max-subtracted. Requires K >= 2.
template <typename T>
BasicTensor<T> softmax_channels(const BasicTensor<T>& logits);

struct LabeledPixel {
  int index = 0;  // flat pixel index y * W + x
  int label = 0;
  friend bool operator==(const LabeledPixel&, const LabeledPixel&) = default;
};

std::vector<LabeledPixel> all_pixels(const LabelMap& map);

template <typename T>
struct CrossEntropy {
  T loss = 0;
  BasicTensor<T> grad_logits;  // d loss / d logits, same shape as probs
};

inline constexpr double kProbabilityFloor = 1e-12;

// Mean of -log p(label) over the labeled pixels, with p clamped below by
// kProbabilityFloor. Returns nullopt for an empty label set.
template <typename T>
std::optional<CrossEntropy<T>> masked_cross_entropy(const BasicTensor<T>& probs,
                                                    std::span<const LabeledPixel> labels);

// p <- p - eta * g. Nothing is written if any gradient is non-finite; a
// NumericalError is thrown instead.
template <typename T>
void sgd_update(std::span<T> params, std::span<const T> grads, T eta);

template <typename T>
void sgd_update(BasicTensor<T>& params, const BasicTensor<T>& grads, T eta);

// Per-pixel argmax over channels; ties resolve to the lowest class index.
template <typename T>
LabelMap argmax_channels(const BasicTensor<T>& probs);

}  // namespace ssn::ops
