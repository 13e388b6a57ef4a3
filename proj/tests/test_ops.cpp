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
#include <cmath>
#include <cstring>
#include <functional>

#include <gtest/gtest.h>

#include "ssn/ops.hpp"
#include "ssn/rng.hpp"

namespace ssn {
namespace {

Tensor64 random_tensor(Shape shape, Rng& rng) {
  Tensor64 t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-1, 1);
  return t;
}

// Central difference of f at every coordinate of x listed in `coords`.
double central_difference(Tensor64& x, std::size_t i, const std::function<double()>& f) {
  const double h = 1e-6, saved = x[i];
  x[i] = saved + h;
  const double up = f();
  x[i] = saved - h;
  const double down = f();
  x[i] = saved;
  return (up - down) / (2 * h);
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(1e-8, std::max(std::abs(a), std::abs(b)));
}

double weighted_sum(const Tensor64& y, const Tensor64& w) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

TEST(Tensor, ShapeMismatchRejected) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), ValidationError);
  EXPECT_THROW(Tensor({0, 2}), ValidationError);
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(to_string(t.shape()), "[2,3]");
}

TEST(Tensor, RequireFiniteRejectsNan) {
  Tensor t({1, 2}, {0.f, std::nanf("")});
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(require_finite(t, "x"), NumericalError);
}

TEST(Conv2d, ZeroInputGivesBias) {
  Tensor in({1, 3, 3});
  Tensor k({2, 1, 3, 3});
  k.fill(0.7f);
  Tensor b({2}, {0.5f, -1.f});
  const Tensor out = ops::conv2d_forward(in, k, b);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) {
      EXPECT_EQ(out.at(0, y, x), 0.5f);
      EXPECT_EQ(out.at(1, y, x), -1.f);
    }
}

TEST(Conv2d, IdentityKernel) {
  Rng rng(3);
  Tensor in({1, 4, 5});
  for (float& v : in.data()) v = static_cast<float>(rng.uniform());
  const Tensor out = ops::conv2d_forward(in, Tensor({1, 1, 1, 1}, {1.f}), Tensor({1}, {0.f}));
  EXPECT_EQ(out, in);
}

TEST(Conv2d, HandCrossCorrelation) {
  Tensor in({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor k({1, 1, 3, 3});
  k.fill(1.f);
  const Tensor out = ops::conv2d_forward(in, k, Tensor({1}));
  EXPECT_FLOAT_EQ(out.at(0, 1, 1), 45.f);
  EXPECT_FLOAT_EQ(out.at(0, 0, 0), 12.f);  // 1 + 2 + 4 + 5
  EXPECT_FLOAT_EQ(out.at(0, 2, 2), 28.f);  // 5 + 6 + 8 + 9
}

TEST(Conv2d, ChannelMismatchRejected) {
  EXPECT_THROW(ops::conv2d_forward(Tensor({2, 4, 4}), Tensor({1, 1, 3, 3}), Tensor({1})),
               ValidationError);
  EXPECT_THROW(ops::conv2d_forward(Tensor({1, 4, 4}), Tensor({1, 1, 2, 2}), Tensor({1})),
               ValidationError);
}

TEST(Conv2d, ZeroCotangentGivesZeroGradients) {
  Rng rng(5);
  const Tensor64 in = random_tensor({1, 4, 4}, rng), k = random_tensor({2, 1, 3, 3}, rng);
  const auto g = ops::conv2d_backward(in, k, Tensor64({2, 4, 4}));
  for (double v : g.input.data()) EXPECT_EQ(v, 0.0);
  for (double v : g.kernel.data()) EXPECT_EQ(v, 0.0);
  for (double v : g.bias.data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, ScalarChainRule) {
  const Tensor64 in({1, 1, 1}, {1.5}), k({1, 1, 1, 1}, {-2.0});
  const auto g = ops::conv2d_backward(in, k, Tensor64({1, 1, 1}, {3.0}));
  EXPECT_DOUBLE_EQ(g.kernel[0], 3.0 * 1.5);
  EXPECT_DOUBLE_EQ(g.input[0], 3.0 * -2.0);
  EXPECT_DOUBLE_EQ(g.bias[0], 3.0);
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  Rng rng(11);
  Tensor64 in = random_tensor({1, 4, 4}, rng), k = random_tensor({2, 1, 3, 3}, rng);
  Tensor64 b = random_tensor({2}, rng);
  const Tensor64 w = random_tensor({2, 4, 4}, rng);
  auto loss = [&] { return weighted_sum(ops::conv2d_forward(in, k, b), w); };
  const auto g = ops::conv2d_backward(in, k, w);
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_LT(relative_error(g.input[i], central_difference(in, i, loss)), 1e-3) << "input " << i;
  }
  for (std::size_t i = 0; i < k.size(); ++i) {
    EXPECT_LT(relative_error(g.kernel[i], central_difference(k, i, loss)), 1e-3) << "kernel " << i;
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    EXPECT_LT(relative_error(g.bias[i], central_difference(b, i, loss)), 1e-3) << "bias " << i;
  }
}

TEST(Conv2d, ContextBackwardMatchesDirect) {
  Rng rng(2);
  const Tensor64 in = random_tensor({2, 4, 4}, rng), k = random_tensor({3, 2, 3, 3}, rng);
  ops::Conv2dContext<double> ctx;
  ops::conv2d_forward(in, k, Tensor64({3}), &ctx);
  const Tensor64 go = random_tensor({3, 4, 4}, rng);
  const auto a = ops::conv2d_backward(ctx, go), b = ops::conv2d_backward(in, k, go);
  EXPECT_EQ(a.kernel, b.kernel);
  EXPECT_EQ(a.input, b.input);
  EXPECT_THROW(ops::conv2d_backward(ops::Conv2dContext<double>{}, go), ValidationError);
  EXPECT_THROW(ops::conv2d_backward(ctx, Tensor64({3, 2, 2})), ValidationError);
}

TEST(Relu, Definition) {
  const Tensor x({3}, {-1, 0, 2});
  EXPECT_EQ(ops::relu_forward(x), Tensor({3}, {0, 0, 2}));
  EXPECT_EQ(ops::relu_backward(x, Tensor({3}, {5, 5, 5})), Tensor({3}, {0, 0, 5}));
}

TEST(MaxPool, UniqueMaxRoutesGradient) {
  const Tensor x({1, 2, 2}, {1, 2, 3, 4});
  const auto r = ops::maxpool2x2_forward(x);
  EXPECT_EQ(r.output[0], 4.f);
  const Tensor g = ops::maxpool2x2_backward(r.argmax, x.shape(), Tensor({1, 1, 1}, {1}));
  EXPECT_EQ(g, Tensor({1, 2, 2}, {0, 0, 0, 1}));
}

TEST(MaxPool, TieGoesToFirstInRowMajorOrder) {
  const Tensor x({1, 2, 2}, {5, 5, 1, 1});
  const auto r = ops::maxpool2x2_forward(x);
  EXPECT_EQ(r.output[0], 5.f);
  const Tensor g = ops::maxpool2x2_backward(r.argmax, x.shape(), Tensor({1, 1, 1}, {1}));
  EXPECT_EQ(g, Tensor({1, 2, 2}, {1, 0, 0, 0}));
}

TEST(MaxPool, OddDimensionsRejected) {
  EXPECT_THROW(ops::maxpool2x2_forward(Tensor({1, 3, 4})), ValidationError);
}

TEST(Upsample, BackwardSumsBlocks) {
  const Tensor x({1, 1, 2}, {1, 2});
  EXPECT_EQ(ops::upsample2x_nearest_forward(x), Tensor({1, 2, 4}, {1, 1, 2, 2, 1, 1, 2, 2}));
  const Tensor g({1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
  EXPECT_EQ(ops::upsample2x_nearest_backward(g), Tensor({1, 1, 2}, {14, 22}));
}

TEST(PoolAndUpsample, GradientsMatchFiniteDifferences) {
  Rng rng(4);
  Tensor64 x = random_tensor({2, 4, 4}, rng);
  const Tensor64 wp = random_tensor({2, 2, 2}, rng), wu = random_tensor({2, 8, 8}, rng);
  const auto pool = ops::maxpool2x2_forward(x);
  const Tensor64 gp = ops::maxpool2x2_backward(pool.argmax, x.shape(), wp);
  const Tensor64 gu = ops::upsample2x_nearest_backward(wu);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double fp = central_difference(x, i, [&] {
      return weighted_sum(ops::maxpool2x2_forward(x).output, wp);
    });
    const double fu = central_difference(x, i, [&] {
      return weighted_sum(ops::upsample2x_nearest_forward(x), wu);
    });
    EXPECT_NEAR(gp[i], fp, 1e-6);
    EXPECT_LT(relative_error(gu[i], fu), 1e-3);
  }
}

TEST(Softmax, EqualLogitsAreUniform) {
  const Tensor p = ops::softmax_channels(Tensor({4, 1, 2}));
  for (float v : p.data()) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(Softmax, ClosedFormTwoClass) {
  const Tensor64 p = ops::softmax_channels(Tensor64({2, 1, 1}, {0.0, std::log(3.0)}));
  EXPECT_NEAR(p[0], 0.25, 1e-12);
  EXPECT_NEAR(p[1], 0.75, 1e-12);
}

TEST(Softmax, ShiftInvariantAndNormalized) {
  Rng rng(9);
  Tensor x({3, 4, 4});
  for (float& v : x.data()) v = static_cast<float>(rng.uniform(-20, 20));
  Tensor shifted = x;
  for (float& v : shifted.data()) v += 7.5f;
  const Tensor a = ops::softmax_channels(x), b = ops::softmax_channels(shifted);
  for (int p = 0; p < 16; ++p) {
    float s = 0;
    for (int c = 0; c < 3; ++c) {
      s += a[c * 16 + p];
      EXPECT_NEAR(a[c * 16 + p], b[c * 16 + p], 1e-6);
    }
    EXPECT_NEAR(s, 1.f, 1e-6);
  }
  EXPECT_THROW(ops::softmax_channels(Tensor({1, 2, 2})), ValidationError);
}

TEST(CrossEntropy, PerfectPredictionIsZero) {
  Tensor p({2, 1, 2}, {1, 0, 0, 1});
  const std::vector<ops::LabeledPixel> px{{0, 0}, {1, 1}};
  EXPECT_FLOAT_EQ(ops::masked_cross_entropy(p, std::span<const ops::LabeledPixel>(px))->loss, 0.f);
}

TEST(CrossEntropy, UniformFourClassIsLn4) {
  Tensor p({4, 2, 2});
  p.fill(0.25f);
  const std::vector<ops::LabeledPixel> px{{0, 3}, {2, 1}, {3, 0}};
  EXPECT_NEAR(ops::masked_cross_entropy(p, std::span<const ops::LabeledPixel>(px))->loss,
              std::log(4.0), 1e-6);
}

TEST(CrossEntropy, HalfProbabilityIsLn2) {
  Tensor64 p({2, 1, 1}, {0.5, 0.5});
  const std::vector<ops::LabeledPixel> px{{0, 1}};
  EXPECT_NEAR(ops::masked_cross_entropy(p, std::span<const ops::LabeledPixel>(px))->loss,
              std::log(2.0), 1e-12);
}

TEST(CrossEntropy, EmptySetSignalled) {
  EXPECT_FALSE(ops::masked_cross_entropy(Tensor({2, 1, 1}), {}).has_value());
}

TEST(CrossEntropy, ClampKeepsLossFinite) {
  Tensor64 p({2, 1, 1}, {1.0, 0.0});
  const std::vector<ops::LabeledPixel> px{{0, 1}};
  const double loss = ops::masked_cross_entropy(p, std::span<const ops::LabeledPixel>(px))->loss;
  EXPECT_NEAR(loss, -std::log(1e-12), 1e-6);
}

TEST(CrossEntropy, LogitGradientMatchesFiniteDifferences) {
  Rng rng(21);
  Tensor64 logits = random_tensor({3, 2, 3}, rng);
  const std::vector<ops::LabeledPixel> px{{0, 2}, {4, 0}, {5, 1}};
  auto loss = [&] {
    return ops::masked_cross_entropy(ops::softmax_channels(logits),
                                     std::span<const ops::LabeledPixel>(px))->loss;
  };
  const auto g = ops::masked_cross_entropy(ops::softmax_channels(logits),
                                           std::span<const ops::LabeledPixel>(px))->grad_logits;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    EXPECT_NEAR(g[i], central_difference(logits, i, loss), 1e-7);
  }
}

TEST(Sgd, Arithmetic) {
  Tensor p({1}, {1.f});
  ops::sgd_update(p, Tensor({1}, {2.f}), 0.1f);
  EXPECT_FLOAT_EQ(p[0], 0.8f);
  ops::sgd_update(p, Tensor({1}, {2.f}), 0.f);
  EXPECT_FLOAT_EQ(p[0], 0.8f);
}

TEST(Sgd, TwoStepsEqualSummedStep) {
  Tensor64 a({2}, {1, -1}), b = a;
  ops::sgd_update(a, Tensor64({2}, {0.5, 0.25}), 0.1);
  ops::sgd_update(a, Tensor64({2}, {1.0, -2.0}), 0.1);
  ops::sgd_update(b, Tensor64({2}, {1.5, -1.75}), 0.1);
  EXPECT_NEAR(a[0], b[0], 1e-15);
  EXPECT_NEAR(a[1], b[1], 1e-15);
}

TEST(Sgd, NonFiniteGradientWritesNothing) {
  Tensor p({2}, {1, 2});
  EXPECT_THROW(ops::sgd_update(p, Tensor({2}, {0.5f, INFINITY}), 0.1f), NumericalError);
  EXPECT_EQ(p, Tensor({2}, {1, 2}));
}

TEST(Argmax, TiesToLowestIndex) {
  const Tensor p({3, 1, 2}, {0.4f, 0.2f, 0.4f, 0.4f, 0.2f, 0.4f});
  const LabelMap m = ops::argmax_channels(p);
  EXPECT_EQ(m.labels[0], 0);
  EXPECT_EQ(m.labels[1], 1);
}

TEST(Determinism, RepeatedForwardIsBitIdentical) {
  Rng rng(8);
  Tensor in({3, 8, 8}), k({4, 3, 3, 3}), b({4});
  for (float& v : in.data()) v = static_cast<float>(rng.normal());
  for (float& v : k.data()) v = static_cast<float>(rng.normal());
  const Tensor a = ops::conv2d_forward(in, k, b), c = ops::conv2d_forward(in, k, b);
  EXPECT_EQ(std::memcmp(a.raw(), c.raw(), a.size() * sizeof(float)), 0);
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(Rng(0).next_u64(), 0xe220a8397b1dcdafull);  // splitmix64 reference value
}

}  // namespace
}  // namespace ssn
