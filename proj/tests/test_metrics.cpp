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
#include <gtest/gtest.h>

#include "ssn/harness.hpp"
#include "ssn/metrics.hpp"
#include "ssn/rng.hpp"

namespace ssn {
namespace {

TEST(Dice, HandExample) {
  LabelMap a(1, 3), b(1, 3);
  a.at(0, 0) = a.at(0, 1) = 1;
  b.at(0, 1) = b.at(0, 2) = 1;
  EXPECT_DOUBLE_EQ(dice(a, b, 1), 0.5);
}

TEST(Dice, IdenticalDisjointAndAbsent) {
  LabelMap a(2, 2), b(2, 2);
  a.at(0, 0) = 1;
  b.at(1, 1) = 1;
  EXPECT_DOUBLE_EQ(dice(a, a, 1), 1.0);
  EXPECT_DOUBLE_EQ(dice(a, b, 1), 0.0);
  EXPECT_DOUBLE_EQ(dice(a, b, 3), 1.0);
  EXPECT_THROW(dice(a, LabelMap(1, 4), 0), ValidationError);
}

TEST(Dice, SymmetricAndRelabelInvariant) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    LabelMap a(8, 8), b(8, 8);
    for (auto& v : a.labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 3));
    for (auto& v : b.labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 3));
    const int perm[4] = {2, 0, 3, 1};
    LabelMap pa = a, pb = b;
    for (auto& v : pa.labels) v = static_cast<std::uint8_t>(perm[v]);
    for (auto& v : pb.labels) v = static_cast<std::uint8_t>(perm[v]);
    for (int c = 0; c < 4; ++c) {
      EXPECT_DOUBLE_EQ(dice(a, b, c), dice(b, a, c));
      EXPECT_DOUBLE_EQ(dice(a, b, c), dice(pa, pb, perm[c]));
    }
    EXPECT_DOUBLE_EQ(mean_dice(a, b, 4), mean_dice(pa, pb, 4));
  }
}

TEST(Stats, MedianAndQuantile) {
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4, 5}, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(quantile({0, 10}, 0.3), 3.0);
}

TEST(InteractionLog, TargetAndCarryForward) {
  harness::InteractionLog log;
  log.initial_mean_dice = 0.8;
  log.initial_per_class_dice = {1.0, 0.6};
  log.records = {{1, 10, {1.0, 0.8}, 0.9, 3, 0}, {2, 8, {1.0, 0.92}, 0.96, 2, 0}};
  EXPECT_EQ(log.interactions_to_target(0.95, 20), 2);
  EXPECT_EQ(log.interactions_to_target(0.99, 20), 21);
  EXPECT_EQ(log.interactions_to_target(0.5, 20), 0);
  EXPECT_DOUBLE_EQ(log.mean_dice_after(0), 0.8);
  EXPECT_DOUBLE_EQ(log.mean_dice_after(1), 0.9);
  EXPECT_DOUBLE_EQ(log.mean_dice_after(7), 0.96);
  EXPECT_DOUBLE_EQ(log.class_dice_after(1, 1), 0.8);
}

TEST(Csv, HeaderSchema) {
  EXPECT_EQ(harness::csv_header(4),
            "interaction,scribble_pixels,mean_dice,dice_0,dice_1,dice_2,dice_3,epochs,ms\n");
}

TEST(Session, PerfectInitialPredictionGivesOneEmptyRecord) {
  // A model whose head bias makes class 0 win everywhere and a gt that is
  // all background.
  Model m = init_model({.num_classes = 2, .base_width = 2}, 1);
  for (auto& g : m.groups) {
    g.weight.fill(0.f);
    g.bias.fill(0.f);
  }
  m.groups.back().bias[0] = 1.f;
  auto model = std::make_shared<const Model>(m);
  Sample s{Tensor({1, 16, 16}), LabelMap(16, 16)};
  const auto log = harness::run_interactive_session(s, model, {});
  ASSERT_EQ(log.records.size(), 1u);
  EXPECT_EQ(log.records[0].interaction, 1);
  EXPECT_EQ(log.records[0].scribble_pixels, 0);
  EXPECT_DOUBLE_EQ(log.records[0].mean_dice, 1.0);
  EXPECT_EQ(harness::log_csv(log, 2),
            harness::csv_header(2) + "1,0.000000,1.000000,1.000000,1.000000,0.000000,0.000000\n");
}

TEST(Harness, ParallelForCoversEveryIndexAndRethrows) {
  std::vector<int> hits(100);
  harness::parallel_for(100, 4, [&](int i) { ++hits[i]; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(harness::parallel_for(10, 3, [](int i) { if (i == 7) throw IoError("x"); }), IoError);
}

TEST(Harness, UnknownProtocolRejected) {
  EXPECT_THROW(harness::run_experiment("nope", {}), ValidationError);
}

TEST(Harness, ConfigRoundTrip) {
  auto c = harness::ExperimentConfig::from_json(nlohmann::json::parse(
      R"({"seed": 3, "refine": {"eta": 0.01, "M": 40}, "oracle": {"L": 3}, "region_grow": false})"));
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.session.refine.max_epochs, 40);
  EXPECT_EQ(c.session.oracle.length, 3);
  EXPECT_FALSE(c.session.region_grow);
  const auto again = harness::ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(again.to_json(), c.to_json());
  EXPECT_THROW(harness::ExperimentConfig::from_json(nlohmann::json::parse(R"({"seed": "x"})")),
               ValidationError);
}

}  // namespace
}  // namespace ssn
