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

#include <gtest/gtest.h>

#include "ssn/ops.hpp"
#include "ssn/refine.hpp"
#include "ssn/rng.hpp"

namespace ssn {
namespace {

const SegNetConfig kTiny{.in_channels = 1, .num_classes = 3, .base_width = 3, .depth = 2};

Tensor random_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({1, h, w});
  for (float& v : t.data()) v = static_cast<float>(rng.uniform());
  return t;
}

// Scribbles on pixels whose current argmax differs from the label, so
// the initial state violates every constraint.
ScribbleMask violating_scribbles(const LabelMap& pred, int k, int count, std::uint64_t seed) {
  Rng rng(seed);
  ScribbleMask m(pred.height, pred.width);
  while (static_cast<int>(m.size()) < count) {
    const int y = rng.uniform_int(0, pred.height - 1), x = rng.uniform_int(0, pred.width - 1);
    m.set(y, x, (pred.at(y, x) + 1 + rng.uniform_int(0, k - 2)) % k);
  }
  return m;
}

TEST(Psi, Examples) {
  Tensor onehot({2, 1, 2}, {1, 0, 0, 1});
  EXPECT_FLOAT_EQ(psi(onehot, ops::argmax_channels(onehot)), 1.f);
  Tensor uniform({4, 2, 2});
  uniform.fill(0.25f);
  EXPECT_FLOAT_EQ(psi(uniform, ops::argmax_channels(uniform)), 0.25f);
  Tensor64 two({2, 1, 2}, {0.9, 0.4, 0.1, 0.6});
  EXPECT_NEAR(psi(two, ops::argmax_channels(two)), 0.75, 1e-12);
}

TEST(PsiGrad, MatchesFiniteDifferencesWithLabelsFixed) {
  Rng rng(3);
  Tensor64 logits({3, 2, 2});
  for (double& v : logits.data()) v = rng.uniform(-2, 2);
  const LabelMap yhat = ops::argmax_channels(logits);
  const Tensor64 g = psi_grad_logits(ops::softmax_channels(logits), yhat);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double saved = logits[i];
    logits[i] = saved + 1e-6;
    const double up = psi(ops::softmax_channels(logits), yhat);
    logits[i] = saved - 1e-6;
    const double down = psi(ops::softmax_channels(logits), yhat);
    logits[i] = saved;
    EXPECT_NEAR(g[i], (up - down) / 2e-6, 1e-8);
  }
}

TEST(ConstraintLoss, Examples) {
  Tensor onehot({2, 1, 2}, {1, 0, 0, 1});
  ScribbleMask agree(1, 2);
  agree.set(0, 0, 0);
  agree.set(0, 1, 1);
  auto r = constraint_loss(onehot, agree);
  EXPECT_FLOAT_EQ(static_cast<float>(r.g), 0.f);
  EXPECT_EQ(r.violations, 0);

  Tensor uniform({4, 2, 2});
  uniform.fill(0.25f);
  ScribbleMask any(2, 2);
  any.set(0, 0, 0);
  any.set(0, 1, 2);
  any.set(1, 1, 3);
  r = constraint_loss(uniform, any);
  EXPECT_NEAR(r.g, std::log(4.0), 1e-6);
  EXPECT_EQ(r.violations, 2);  // tie-break argmax is class 0

  Tensor half({2, 1, 1}, {0.5f, 0.5f});
  ScribbleMask one(1, 1);
  one.set(0, 0, 0);
  r = constraint_loss(half, one);
  EXPECT_NEAR(r.g, std::log(2.0), 1e-6);
  EXPECT_EQ(r.violations, 0);

  EXPECT_THROW(constraint_loss(half, ScribbleMask(1, 1)), EmptyScribblesError);
}

TEST(Refine, SatisfiedConstraintsAreAFixpoint) {
  auto model = std::make_shared<const Model>(init_model(kTiny, 2));
  const Tensor image = random_image(8, 8, 1);
  const Tensor logits = forward(*model, image);
  const LabelMap pred = ops::argmax_channels(logits);
  ScribbleMask agree(8, 8);
  for (int i = 0; i < 64; i += 5) agree.set(i / 8, i % 8, pred.labels[i]);
  InstanceWeights w(model, 4);
  const auto out = refine(image, agree, w, {});
  EXPECT_EQ(out.report.epochs_run, 0);
  EXPECT_TRUE(out.report.satisfied);
  EXPECT_EQ(out.report.drift, 0.0);
  EXPECT_EQ(out.segmentation.probs, ops::softmax_channels(logits));
  EXPECT_EQ(out.segmentation.labels, pred);
  for (int j = 0; j < 4; ++j) EXPECT_EQ(w.tail()[j], model->groups[5 + j]);
}

// Single 1x1 conv head to K=2 logits on a 1x1 constant image. The two
// bottleneck convs pass the pixel value through unchanged, so the head sees
// feature h = v and the logit margin m = z1 - z0 obeys
//   m <- m + 2 eta (1 + h^2) sigmoid(-m),  g = log(1 + exp(-m)).
TEST(Refine, MatchesClosedFormLogisticRecursion) {
  Model64 m = init_model({.in_channels = 1, .num_classes = 2, .base_width = 1, .depth = 0}, 0)
                  .cast<double>();
  for (int j = 0; j < 2; ++j) {
    m.groups[j].weight.fill(0.0);
    m.groups[j].weight[4] = 1.0;  // center tap of the 3x3 kernel
    m.groups[j].bias.fill(0.0);
  }
  m.groups[2].weight = Tensor64({2, 1, 1, 1}, {0.5, -0.5});
  m.groups[2].bias = Tensor64({2}, {1.0, 0.0});
  const double h = 0.8, eta = 0.5;
  const Tensor64 image({1, 1, 1}, {h});
  ScribbleMask s(1, 1);
  s.set(0, 0, 1);

  RefineConfig cfg;
  cfg.mode = RefineMode::kDirect;
  cfg.alpha = 0;
  cfg.learning_rate = eta;
  cfg.max_epochs = 50;
  cfg.trainable_layers = 1;
  InstanceWeights64 w(std::make_shared<const Model64>(m), 1);
  const auto out = refine(image, s, w, cfg);

  double margin = (-0.5 * h + 0.0) - (0.5 * h + 1.0);
  std::vector<double> expected;
  for (int t = 0;; ++t) {
    expected.push_back(std::log1p(std::exp(-margin)));
    if (margin > 0 || t == cfg.max_epochs) break;
    margin += 2 * eta * (1 + h * h) / (1 + std::exp(margin));
  }
  ASSERT_EQ(out.report.g.size(), expected.size());
  for (std::size_t t = 0; t < expected.size(); ++t) EXPECT_NEAR(out.report.g[t], expected[t], 1e-6);
  EXPECT_EQ(out.report.epochs_run, static_cast<int>(expected.size()) - 1);
  EXPECT_TRUE(out.report.satisfied);
  EXPECT_EQ(out.segmentation.labels.labels[0], 1);
}

// Objective whose gradient refine_gradient returns, evaluated directly.
double objective(const InstanceWeights64& w, const Tensor64& image, const ScribbleMask& s,
                 const RefineConfig& cfg, double g_fixed, const LabelMap& yhat_fixed) {
  ForwardTape<double> tape;
  const auto probs = ops::softmax_channels(forward(w.base().config, w.refs(), image, tape));
  const double prox = cfg.alpha * w.drift();
  if (cfg.mode == RefineMode::kPaper) return g_fixed * psi(probs, yhat_fixed) + prox;
  return constraint_loss(probs, s).g + prox;
}

void check_gradient(RefineMode mode) {
  auto base = std::make_shared<const Model64>(init_model(kTiny, 6).cast<double>());
  const Tensor64 image = random_image(8, 8, 3).cast<double>();
  RefineConfig cfg;
  cfg.mode = mode;
  cfg.alpha = 0.3;
  cfg.trainable_layers = 3;
  InstanceWeights64 w(base, cfg.trainable_layers);
  Rng rng(12);
  for (auto& g : w.tail()) {
    for (double& v : g.weight.data()) v += rng.uniform(-0.05, 0.05);
    for (double& v : g.bias.data()) v += rng.uniform(-0.05, 0.05);
  }
  const auto seg = segment(base->config, w.refs(), image);
  const ScribbleMask s = violating_scribbles(seg.labels, 3, 6, 4);
  const double g_fixed = constraint_loss(seg.probs, s).g;
  const auto grads = refine_gradient(image, s, w, cfg);
  ASSERT_EQ(grads.size(), 3u);

  int checked = 0;
  for (std::size_t j = 0; j < grads.size(); ++j) {
    auto& weight = w.tail()[j].weight;
    for (int n = 0; n < 40; ++n) {
      const std::size_t i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(weight.size()) - 1));
      const double saved = weight[i], step = 1e-6;
      weight[i] = saved + step;
      const double up = objective(w, image, s, cfg, g_fixed, seg.labels);
      weight[i] = saved - step;
      const double down = objective(w, image, s, cfg, g_fixed, seg.labels);
      weight[i] = saved;
      const double fd = (up - down) / (2 * step), an = grads[j].weight[i];
      EXPECT_LE(std::abs(an - fd), 1e-3 * std::max(std::abs(fd), 1e-6))
          << to_string(mode) << " group " << j << " coord " << i << ": " << an << " vs " << fd;
      ++checked;
    }
  }
  EXPECT_GE(checked, 100);
}

TEST(RefineGradient, PaperModeMatchesFiniteDifferences) { check_gradient(RefineMode::kPaper); }
TEST(RefineGradient, DirectModeMatchesFiniteDifferences) { check_gradient(RefineMode::kDirect); }

TEST(RefineGradient, ProximalTermIsZeroAtStart) {
  auto base = std::make_shared<const Model64>(init_model(kTiny, 6).cast<double>());
  const Tensor64 image = random_image(8, 8, 3).cast<double>();
  InstanceWeights64 w(base, 2);
  const auto s = violating_scribbles(segment(base->config, w.refs(), image).labels, 3, 4, 1);
  RefineConfig with;
  with.trainable_layers = 2;
  with.alpha = 5.0;
  RefineConfig without = with;
  without.alpha = 0.0;
  const auto a = refine_gradient(image, s, w, with), b = refine_gradient(image, s, w, without);
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(a[j].weight, b[j].weight);
}

TEST(Refine, FrozenGroupsNeverChange) {
  const Model pristine = init_model(kTiny, 8);
  auto model = std::make_shared<const Model>(pristine);
  const Tensor image = random_image(16, 16, 2);
  InstanceWeights w(model, 4);
  const auto s = violating_scribbles(segment(*model, image).labels, 3, 10, 2);
  RefineConfig cfg;
  cfg.max_epochs = 20;
  cfg.learning_rate = 0.05;
  const auto out = refine(image, s, w, cfg);
  EXPECT_GT(out.report.epochs_run, 0);
  EXPECT_GT(out.report.drift, 0.0);
  const auto refs = w.refs();
  for (int j = 0; j < w.first_trainable(); ++j) {
    EXPECT_EQ(refs[j], &model->groups[j]);
    EXPECT_EQ(*refs[j], pristine.groups[j]);
  }
  EXPECT_EQ(model_tensors(*model), model_tensors(pristine));
}

TEST(Refine, ReportInvariantsAndDeterminism) {
  auto model = std::make_shared<const Model>(init_model(kTiny, 8));
  const Tensor image = random_image(16, 16, 5);
  const auto s = violating_scribbles(segment(*model, image).labels, 3, 12, 9);
  RefineConfig cfg;
  cfg.max_epochs = 15;
  cfg.learning_rate = 0.05;
  const auto a = refine(image, s, model, cfg), b = refine(image, s, model, cfg);
  EXPECT_LE(a.report.epochs_run, cfg.max_epochs);
  EXPECT_EQ(a.report.g.size(), static_cast<std::size_t>(a.report.epochs_run) + 1);
  EXPECT_EQ(a.report.violations.size(), a.report.g.size());
  EXPECT_EQ(a.report.satisfied, a.report.violations.back() == 0);
  EXPECT_EQ(a.report.g, b.report.g);
  EXPECT_EQ(a.segmentation.probs, b.segmentation.probs);
  const auto j = a.report.to_json(false);
  EXPECT_FALSE(j.contains("wall_ms"));
  EXPECT_EQ(j["epochs_run"], a.report.epochs_run);
}

TEST(Refine, ResetRestoresPristineOutput) {
  auto model = std::make_shared<const Model>(init_model(kTiny, 3));
  const Tensor image = random_image(8, 8, 7);
  const Tensor before = forward(*model, image);
  InstanceWeights w(model, 4);
  RefineConfig cfg;
  cfg.max_epochs = 10;
  cfg.learning_rate = 0.1;
  refine(image, violating_scribbles(ops::argmax_channels(before), 3, 5, 3), w, cfg);
  EXPECT_GT(w.drift(), 0.0);
  w.reset();
  EXPECT_EQ(w.drift(), 0.0);
  EXPECT_EQ(ops::softmax_channels(before), segment(w, image).probs);
}

TEST(Refine, SessionsOnDifferentImagesDoNotInteract) {
  auto model = std::make_shared<const Model>(init_model(kTiny, 3));
  const Tensor a = random_image(8, 8, 1), b = random_image(8, 8, 2);
  const auto sa = violating_scribbles(segment(*model, a).labels, 3, 5, 1);
  const auto sb = violating_scribbles(segment(*model, b).labels, 3, 5, 2);
  RefineConfig cfg;
  cfg.max_epochs = 10;
  cfg.learning_rate = 0.1;
  InstanceWeights w(model, 4);
  const auto a1 = refine(a, sa, w, cfg);
  w.reset();
  const auto b1 = refine(b, sb, w, cfg);
  w.reset();
  const auto b2 = refine(b, sb, w, cfg);
  w.reset();
  const auto a2 = refine(a, sa, w, cfg);
  EXPECT_EQ(a1.segmentation.probs, a2.segmentation.probs);
  EXPECT_EQ(b1.segmentation.probs, b2.segmentation.probs);
}

TEST(Refine, NonFiniteGradientAbortsWithPartialReport) {
  auto model = std::make_shared<const Model>(init_model(kTiny, 3));
  const Tensor image = random_image(8, 8, 1);
  RefineConfig cfg;
  cfg.learning_rate = 1e300;
  cfg.max_epochs = 50;
  cfg.trainable_layers = 2;
  const auto s = violating_scribbles(segment(*model, image).labels, 3, 6, 5);
  try {
    refine(image, s, model, cfg);
    FAIL() << "expected abort";
  } catch (const RefineAborted& e) {
    EXPECT_GE(e.report().epochs_run, 1);
    EXPECT_FALSE(e.report().g.empty());
    EXPECT_FALSE(e.report().satisfied);
  }
}

TEST(Refine, InputErrors) {
  auto model = std::make_shared<const Model>(init_model(kTiny, 3));
  const Tensor image = random_image(8, 8, 1);
  EXPECT_THROW(refine(image, ScribbleMask(8, 8), model, {}), EmptyScribblesError);
  ScribbleMask bad(8, 8);
  bad.set(0, 0, 3);
  try {
    refine(image, bad, model, {});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.code(), "label_out_of_range");
  }
  ScribbleMask ok(8, 8);
  ok.set(0, 0, 1);
  RefineConfig cfg;
  cfg.trainable_layers = 10;
  EXPECT_THROW(refine(image, ok, model, cfg), ValidationError);
  cfg.trainable_layers = 4;
  cfg.learning_rate = 0;
  EXPECT_THROW(refine(image, ok, model, cfg), ValidationError);
  EXPECT_THROW(refine(random_image(4, 8, 1), ok, model, {}), ValidationError);
}

TEST(RefineConfig, JsonRoundTrip) {
  RefineConfig c;
  c.mode = RefineMode::kPaper;
  c.max_epochs = 7;
  const auto back = RefineConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_THROW(RefineConfig::from_json(nlohmann::json::parse(R"({"mode": "fast"})")), ValidationError);
  EXPECT_EQ(RefineConfig::from_json(nlohmann::json::parse(R"({"M": 3})"), c).max_epochs, 3);
}

}  // namespace
}  // namespace ssn
