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
#include "ssn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ssn::ops {
namespace {

template <typename T>
void require_chw(const BasicTensor<T>& t, const char* what) {
  if (t.rank() != 3) {
    throw ValidationError("shape_mismatch",
                          std::string(what) + " must be [C,H,W], got " + to_string(t.shape()));
  }
}

// Dot product with eight interleaved partial sums combined pairwise.
// Fixed order; lets the compiler vectorize without reassociation.
template <typename T>
struct LaneSum {
  T acc[8] = {};
  void add(const T* a, const T* b, int n) {
    int i = 0;
    for (; i + 8 <= n; i += 8) {
      for (int j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
    }
    for (int j = 0; i < n; ++i, ++j) acc[j] += a[i] * b[i];
  }
  void add(const T* a, int n) {
    int i = 0;
    for (; i + 8 <= n; i += 8) {
      for (int j = 0; j < 8; ++j) acc[j] += a[i + j];
    }
    for (int j = 0; i < n; ++i, ++j) acc[j] += a[i];
  }
  T total() const {
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  }
};

}  // namespace

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                              const BasicTensor<T>& bias, Conv2dContext<T>* context) {
  require_chw(input, "conv input");
  if (kernel.rank() != 4 || kernel.dim(2) != kernel.dim(3) || kernel.dim(2) % 2 == 0) {
    throw ValidationError("shape_mismatch",
                          "conv kernel must be [C_out,C_in,k,k] with odd k, got " +
                              to_string(kernel.shape()));
  }
  const int c_out = kernel.dim(0), c_in = kernel.dim(1), k = kernel.dim(2);
  if (c_in != input.dim(0)) {
    throw ValidationError("shape_mismatch", "conv kernel expects " + std::to_string(c_in) +
                                                " input channels, input has " +
                                                std::to_string(input.dim(0)));
  }
  if (bias.rank() != 1 || bias.dim(0) != c_out) {
    throw ValidationError("shape_mismatch", "conv bias must be [" + std::to_string(c_out) + "]");
  }
  require_finite(input, "conv input");

  const int h = input.dim(1), w = input.dim(2), pad = (k - 1) / 2;
  BasicTensor<T> out({c_out, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int co = 0; co < c_out; ++co) {
    T* o = out.raw() + co * plane;
    std::fill(o, o + plane, bias[co]);
    for (int ci = 0; ci < c_in; ++ci) {
      const T* in = input.raw() + ci * plane;
      const T* kw = kernel.raw() + (static_cast<std::size_t>(co) * c_in + ci) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          const T wv = kw[ky * k + kx];
          for (int y = y0; y < y1; ++y) {
            T* orow = o + static_cast<std::size_t>(y) * w;
            const T* irow = in + static_cast<std::size_t>(y + dy) * w + dx;
            for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
          }
        }
      }
    }
  }
  if (context) {
    context->input = input;
    context->kernel = kernel;
    context->output_shape = out.shape();
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                             const BasicTensor<T>& grad_out, bool want_input_grad) {
  const int c_out = kernel.dim(0), c_in = kernel.dim(1), k = kernel.dim(2);
  const int h = input.dim(1), w = input.dim(2), pad = (k - 1) / 2;
  if (grad_out.rank() != 3 || grad_out.dim(0) != c_out || grad_out.dim(1) != h ||
      grad_out.dim(2) != w) {
    throw ValidationError("shape_mismatch",
                          "conv grad_out shape " + to_string(grad_out.shape()) +
                              " does not match forward output");
  }
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  ConvGrads<T> g;
  g.kernel = BasicTensor<T>(kernel.shape());
  g.bias = BasicTensor<T>({c_out});
  if (want_input_grad) g.input = BasicTensor<T>(input.shape());

  for (int co = 0; co < c_out; ++co) {
    const T* go = grad_out.raw() + co * plane;
    LaneSum<T> bsum;
    bsum.add(go, static_cast<int>(plane));
    g.bias[co] = bsum.total();
    for (int ci = 0; ci < c_in; ++ci) {
      const T* in = input.raw() + ci * plane;
      const std::size_t kofs = (static_cast<std::size_t>(co) * c_in + ci) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          LaneSum<T> acc;
          for (int y = y0; y < y1; ++y) {
            acc.add(go + static_cast<std::size_t>(y) * w + x0,
                    in + static_cast<std::size_t>(y + dy) * w + x0 + dx, x1 - x0);
          }
          g.kernel[kofs + ky * k + kx] = acc.total();
          if (want_input_grad) {
            const T wv = kernel[kofs + ky * k + kx];
            T* gi = g.input.raw() + ci * plane;
            for (int y = y0; y < y1; ++y) {
              T* irow = gi + static_cast<std::size_t>(y + dy) * w + dx;
              const T* orow = go + static_cast<std::size_t>(y) * w;
              for (int x = x0; x < x1; ++x) irow[x] += wv * orow[x];
            }
          }
        }
      }
    }
  }
  return g;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Conv2dContext<T>& context, const BasicTensor<T>& grad_out,
                             bool want_input_grad) {
  if (!context.valid()) {
    throw ValidationError("missing_context", "conv2d_backward called without a forward context");
  }
  if (grad_out.shape() != context.output_shape) {
    throw ValidationError("stale_context", "grad_out shape " + to_string(grad_out.shape()) +
                                               " does not match cached output " +
                                               to_string(context.output_shape));
  }
  return conv2d_backward(context.input, context.kernel, grad_out, want_input_grad);
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& x) {
  BasicTensor<T> y = x;
  for (T& v : y.data()) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& activation, const BasicTensor<T>& grad_out) {
  if (activation.shape() != grad_out.shape()) {
    throw ValidationError("shape_mismatch", "relu_backward shape mismatch");
  }
  BasicTensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(activation[i] > T(0))) g[i] = T(0);
  }
  return g;
}

template <typename T>
PoolResult<T> maxpool2x2_forward(const BasicTensor<T>& x) {
  require_chw(x, "maxpool input");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2) {
    throw ValidationError("odd_dimensions",
                          "maxpool2x2 needs even spatial dims, got " + to_string(x.shape()));
  }
  PoolResult<T> r{BasicTensor<T>({c, h / 2, w / 2}), {}};
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h / 2; ++y) {
      for (int xx = 0; xx < w / 2; ++xx, ++o) {
        const int base = (ch * h + 2 * y) * w + 2 * xx;
        const int cand[4] = {base, base + 1, base + w, base + w + 1};
        int best = cand[0];
        for (int i = 1; i < 4; ++i) {
          if (x[cand[i]] > x[best]) best = cand[i];
        }
        r.output[o] = x[best];
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

template <typename T>
BasicTensor<T> maxpool2x2_backward(const std::vector<int>& argmax, const Shape& input_shape,
                                   const BasicTensor<T>& grad_out) {
  if (argmax.size() != grad_out.size()) {
    throw ValidationError("shape_mismatch", "maxpool_backward index/gradient size mismatch");
  }
  BasicTensor<T> g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

template <typename T>
BasicTensor<T> upsample2x_nearest_forward(const BasicTensor<T>& x) {
  require_chw(x, "upsample input");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  BasicTensor<T> out({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < 2 * h; ++y) {
      const T* src = x.raw() + (static_cast<std::size_t>(ch) * h + y / 2) * w;
      T* dst = out.raw() + (static_cast<std::size_t>(ch) * 2 * h + y) * 2 * w;
      for (int xx = 0; xx < 2 * w; ++xx) dst[xx] = src[xx / 2];
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> upsample2x_nearest_backward(const BasicTensor<T>& grad_out) {
  require_chw(grad_out, "upsample grad");
  const int c = grad_out.dim(0), h = grad_out.dim(1), w = grad_out.dim(2);
  if (h % 2 || w % 2) {
    throw ValidationError("odd_dimensions", "upsample gradient must have even spatial dims");
  }
  BasicTensor<T> g({c, h / 2, w / 2});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h / 2; ++y) {
      for (int xx = 0; xx < w / 2; ++xx) {
        g.at(ch, y, xx) = (grad_out.at(ch, 2 * y, 2 * xx) + grad_out.at(ch, 2 * y, 2 * xx + 1)) +
                          (grad_out.at(ch, 2 * y + 1, 2 * xx) +
                           grad_out.at(ch, 2 * y + 1, 2 * xx + 1));
      }
    }
  }
  return g;
}

template <typename T>
BasicTensor<T> softmax_channels(const BasicTensor<T>& logits) {
  require_chw(logits, "logits");
  const int k = logits.dim(0);
  if (k < 2) throw ValidationError("too_few_classes", "softmax needs at least two classes");
  require_finite(logits, "logits");
  const std::size_t plane = static_cast<std::size_t>(logits.dim(1)) * logits.dim(2);
  BasicTensor<T> p(logits.shape());
  for (std::size_t i = 0; i < plane; ++i) {
    T m = logits[i];
    for (int c = 1; c < k; ++c) m = std::max(m, logits[c * plane + i]);
    T s = 0;
    for (int c = 0; c < k; ++c) {
      const T e = std::exp(logits[c * plane + i] - m);
      p[c * plane + i] = e;
      s += e;
    }
    for (int c = 0; c < k; ++c) p[c * plane + i] /= s;
  }
  return p;
}

std::vector<LabeledPixel> all_pixels(const LabelMap& map) {
  std::vector<LabeledPixel> out(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    out[i] = {static_cast<int>(i), map.labels[i]};
  }
  return out;
}

template <typename T>
std::optional<CrossEntropy<T>> masked_cross_entropy(const BasicTensor<T>& probs,
                                                    std::span<const LabeledPixel> labels) {
  require_chw(probs, "probs");
  if (labels.empty()) return std::nullopt;
  const int k = probs.dim(0);
  const std::size_t plane = static_cast<std::size_t>(probs.dim(1)) * probs.dim(2);
  CrossEntropy<T> ce;
  ce.grad_logits = BasicTensor<T>(probs.shape());
  const T inv_n = T(1) / static_cast<T>(labels.size());
  double total = 0;
  for (const LabeledPixel& lp : labels) {
    if (lp.index < 0 || static_cast<std::size_t>(lp.index) >= plane || lp.label < 0 ||
        lp.label >= k) {
      throw ValidationError("label_out_of_range", "labeled pixel out of bounds or label >= K");
    }
    const T p = probs[lp.label * plane + lp.index];
    total -= std::log(std::max(static_cast<double>(p), kProbabilityFloor));
    for (int c = 0; c < k; ++c) {
      ce.grad_logits[c * plane + lp.index] +=
          inv_n * (probs[c * plane + lp.index] - (c == lp.label ? T(1) : T(0)));
    }
  }
  ce.loss = static_cast<T>(total / static_cast<double>(labels.size()));
  return ce;
}

template <typename T>
void sgd_update(std::span<T> params, std::span<const T> grads, T eta) {
  if (params.size() != grads.size()) {
    throw ValidationError("shape_mismatch", "sgd_update parameter/gradient size mismatch");
  }
  for (T g : grads) {
    if (!std::isfinite(g)) throw NumericalError("non_finite_gradient", "gradient is NaN or Inf");
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= eta * grads[i];
}

template <typename T>
void sgd_update(BasicTensor<T>& params, const BasicTensor<T>& grads, T eta) {
  if (params.shape() != grads.shape()) {
    throw ValidationError("shape_mismatch", "sgd_update parameter/gradient shape mismatch");
  }
  sgd_update(params.data(), grads.data(), eta);
}

template <typename T>
LabelMap argmax_channels(const BasicTensor<T>& probs) {
  require_chw(probs, "probs");
  const int k = probs.dim(0), h = probs.dim(1), w = probs.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  LabelMap out(h, w);
  for (std::size_t i = 0; i < plane; ++i) {
    int best = 0;
    for (int c = 1; c < k; ++c) {
      if (probs[c * plane + i] > probs[best * plane + i]) best = c;
    }
    out.labels[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

#define SSN_INSTANTIATE(T)                                                                       \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicTensor<T>&,           \
                                         const BasicTensor<T>&, Conv2dContext<T>*);              \
  template ConvGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,            \
                                        const BasicTensor<T>&, bool);                            \
  template ConvGrads<T> conv2d_backward(const Conv2dContext<T>&, const BasicTensor<T>&, bool);   \
  template BasicTensor<T> relu_forward(const BasicTensor<T>&);                                   \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);           \
  template PoolResult<T> maxpool2x2_forward(const BasicTensor<T>&);                              \
  template BasicTensor<T> maxpool2x2_backward(const std::vector<int>&, const Shape&,             \
                                              const BasicTensor<T>&);                            \
  template BasicTensor<T> upsample2x_nearest_forward(const BasicTensor<T>&);                     \
  template BasicTensor<T> upsample2x_nearest_backward(const BasicTensor<T>&);                    \
  template BasicTensor<T> softmax_channels(const BasicTensor<T>&);                               \
  template std::optional<CrossEntropy<T>> masked_cross_entropy(const BasicTensor<T>&,            \
                                                               std::span<const LabeledPixel>);   \
  template void sgd_update(std::span<T>, std::span<const T>, T);                                 \
  template void sgd_update(BasicTensor<T>&, const BasicTensor<T>&, T);                           \
  template LabelMap argmax_channels(const BasicTensor<T>&);

SSN_INSTANTIATE(float)
SSN_INSTANTIATE(double)

#undef SSN_INSTANTIATE

}  // namespace ssn::ops
