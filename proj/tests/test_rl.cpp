/*
 * Copyright 2026 The ContextGuard Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "contextguard/rl.hpp"
#include "contextguard/training.hpp"
#include "test_util.hpp"

namespace contextguard {
namespace {

using testing::small_world;
using testing::tiny_config;

PairRecord fully_annotated(bool overall, std::array<bool, kNumDimensions> dims) {
  PairRecord r;
  r.id = "r";
  r.overall_consistent = overall;
  for (int k = 0; k < kNumDimensions; ++k) r.ctxt_labels[k] = dims[k];
  return r;
}

ActionProfile action_for(bool overall, std::array<bool, kNumDimensions> dims) {
  ActionProfile a;
  a.overall = overall;
  for (int k = 0; k < kNumDimensions; ++k) a.per_dimension[k] = dims[k];
  return a;
}

VerdictScores constant_scores(double s) {
  VerdictScores v;
  v.overall = s;
  v.per_dimension.fill(s);
  return v;
}

TEST(Reward, WorkedExamples) {
  const RewardWeights w;
  const std::array<bool, 5> all{true, true, true, true, true};
  EXPECT_EQ(reward(action_for(true, all), fully_annotated(true, all), w), 2.0);
  EXPECT_EQ(reward(action_for(false, all), fully_annotated(true, all), w), 0.0);
  const std::array<bool, 5> two_right{true, true, false, false, false};
  EXPECT_DOUBLE_EQ(reward(action_for(true, two_right), fully_annotated(true, all), w), 1.4);
}

TEST(Reward, KeyMismatchThrows) {
  const RewardWeights w;
  PairRecord r = fully_annotated(true, {true, true, true, true, true});
  r.ctxt_labels[2].reset();
  EXPECT_THROW(reward(action_for(true, {true, true, true, true, true}), r, w),
               std::invalid_argument);
}

TEST(Reward, BoundsGatingAndUnannotatedInvariance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    RewardWeights w;
    w.lambda0 = u(rng);
    for (double& l : w.lambda_k) l = u(rng);
    PairRecord r;
    r.id = "r";
    r.overall_consistent = u(rng) < 0.5;
    ActionProfile a;
    a.overall = u(rng) < 0.5;
    std::vector<ContextDimension> annotated;
    for (int k = 0; k < kNumDimensions; ++k) {
      if (u(rng) < 0.5) {
        r.ctxt_labels[k] = u(rng) < 0.5;
        a.per_dimension[k] = u(rng) < 0.5;
        annotated.push_back(kAllDimensions[k]);
      }
    }
    const double R = reward(a, r, w);
    EXPECT_GE(R, 0.0);
    EXPECT_LE(R, w.max_reward(annotated) + 1e-15);
    if (a.overall != r.overall_consistent) EXPECT_EQ(R, 0.0);
    RewardWeights w2 = w;
    for (int k = 0; k < kNumDimensions; ++k) {
      if (!r.ctxt_labels[k]) w2.lambda_k[k] += 10.0;
    }
    EXPECT_EQ(reward(a, r, w2), R);
  }
}

TEST(Reward, WeightsValidation) {
  RewardWeights w;
  w.lambda0 = 0.0;
  w.lambda_k.fill(0.0);
  EXPECT_THROW(w.validate(), ConfigError);
  w.lambda_k[1] = -0.1;
  EXPECT_THROW(w.validate(), ConfigError);
}

TEST(ExpectedReward, CoinFlipExamples) {
  const PairRecord r = fully_annotated(true, {true, false, true, false, true});
  RewardWeights w;
  w.lambda_k.fill(0.0);
  EXPECT_DOUBLE_EQ(exact_expected_reward(constant_scores(0.5), r, w), 0.5);
  w.lambda_k.fill(0.2);
  EXPECT_DOUBLE_EQ(exact_expected_reward(constant_scores(0.5), r, w), 0.75);
}

TEST(ExpectedReward, MatchesMonteCarlo) {
  const PairRecord r = fully_annotated(false, {true, false, true, true, false});
  const RewardWeights w;
  VerdictScores s;
  s.overall = 0.35;
  s.per_dimension = {0.1, 0.8, 0.55, 0.3, 0.9};
  const auto annotated = r.annotated_dimensions();
  Rng rng(8);
  const int n = 1000000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double R = reward(sample_action(s, annotated, rng).action, r, w);
    sum += R;
    sum2 += R * R;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  EXPECT_LE(std::abs(mean - exact_expected_reward(s, r, w)), 3 * se);
}

TEST(EnumerateActions, CountsAndLimits) {
  const std::vector<ContextDimension> three{ContextDimension::kSentiment,
                                            ContextDimension::kNarrative,
                                            ContextDimension::kBackground};
  EXPECT_EQ(enumerate_actions(three).size(), 16u);
  EXPECT_EQ(enumerate_actions({}).size(), 2u);
}

TEST(SampleAction, FrequencyAtThirtyPercent) {
  const VerdictScores s = constant_scores(0.3);
  Rng rng(12);
  int consistent = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) consistent += sample_action(s, {}, rng).action.overall;
  EXPECT_NEAR(static_cast<double>(consistent) / n, 0.3, 0.005);
}

TEST(SampleAction, NearCertainScores) {
  const VerdictScores s = constant_scores(1 - 1e-9);
  Rng rng(2);
  const std::vector<ContextDimension> dims(kAllDimensions.begin(), kAllDimensions.end());
  for (int i = 0; i < 10000; ++i) {
    const auto a = sample_action(s, dims, rng).action;
    EXPECT_TRUE(a.overall);
    for (auto d : dims) EXPECT_TRUE(*a.per_dimension[index_of(d)]);
  }
}

TEST(SampleAction, LogProbMatchesDirectComputation) {
  VerdictScores s;
  s.overall = 0.62;
  s.per_dimension = {0.2, 0.9, 0.5, 0.33, 0.71};
  const std::vector<ContextDimension> dims{ContextDimension::kNarrative,
                                           ContextDimension::kLogicalCoherence};
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto sa = sample_action(s, dims, rng);
    double lp = std::log(sa.action.overall ? 0.62 : 0.38);
    lp += std::log(*sa.action.per_dimension[1] ? 0.9 : 0.1);
    lp += std::log(*sa.action.per_dimension[4] ? 0.71 : 0.29);
    EXPECT_NEAR(sa.log_prob, lp, 1e-12);
    EXPECT_FALSE(sa.action.per_dimension[0].has_value());
  }
}

class ReinforceTest : public ::testing::Test {
 protected:
  SyntheticWorld world = small_world();
  ModelConfig config = tiny_config(world);
  ModelState model = initial_model(config, world, 3);
  PairRecord record = make_record();

  PairRecord make_record() {
    Rng rng(1);
    PairRecord r = make_consistent_record("x", generate_scene(world, rng),
                                          DatasetProfile::kTamperedNewsEnt, world);
    // Five annotated dimensions: 2^6 enumerable actions.
    for (int k = 0; k < kNumDimensions; ++k) r.ctxt_labels[k] = k % 2 == 0;
    r.overall_consistent = false;
    return r;
  }
};

TEST_F(ReinforceTest, ZeroWeightsGiveZeroGradientAndNoUpdate) {
  RewardWeights w;
  w.lambda0 = 0.0;
  w.lambda_k.fill(0.0);
  const std::vector<const PairRecord*> batch{&record};
  const auto est = reinforce_gradient(batch, model, config, w, 0.0, 1);
  EXPECT_EQ(est.grad.squared_norm(), 0.0);
  OptimizerConfig oc;
  Adam adam(model, oc);
  ModelState m = model;
  RewardBaseline b;
  reinforce_step(batch, m, config, w, b, adam, 1);
  EXPECT_TRUE(m == model);
  EXPECT_THROW(reinforce_gradient({}, model, config, w, 0.0, 1), std::invalid_argument);
}

TEST_F(ReinforceTest, PerfectPolicyEarnsMaximumReward) {
  const RewardWeights w;
  const std::vector<ContextDimension> dims(kAllDimensions.begin(), kAllDimensions.end());
  Rng rng(4);
  double total = 0.0;
  const int n = 5000;
  for (int i = 0; i < n; ++i) {
    PairRecord r = record;
    r.overall_consistent = i % 2 == 0;
    VerdictScores s;
    s.overall = r.overall_consistent ? 1 - 1e-9 : 1e-9;
    for (int k = 0; k < kNumDimensions; ++k) {
      s.per_dimension[k] = *r.ctxt_labels[k] ? 1 - 1e-9 : 1e-9;
    }
    total += reward(sample_action(s, dims, rng).action, r, w);
  }
  EXPECT_NEAR(total / n, w.max_reward(dims), 1e-3);
}

TEST_F(ReinforceTest, ExactGradientMatchesFiniteDifferences) {
  const RewardWeights w;
  const ModelState g = exact_reward_gradient(model, record, w, config);
  // Gradient ascent direction: the checker compares d(loss)/dtheta, so feed
  // the negated expectation.
  ModelState neg = g;
  neg.add_scaled(g, -2.0);
  const auto rep = testing::finite_difference_check(model, neg, [&](const ModelState& m) {
    return -exact_expected_reward(m, record, w, config);
  });
  EXPECT_LT(rep.max_rel_error, testing::kFdTolerance) << rep.worst_path;
}

// The estimator's mean, projected on the exact gradient and per logit,
// stays within 3 standard errors of the enumeration value.
TEST_F(ReinforceTest, MonteCarloGradientIsUnbiased) {
  const RewardWeights w;
  const ModelState exact = exact_reward_gradient(model, record, w, config);
  const double exact_norm2 = exact.squared_norm();
  ASSERT_GT(exact_norm2, 0.0);
  const std::vector<const PairRecord*> batch{&record};
  const int n = 50000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto est = reinforce_gradient(batch, model, config, w, 0.3, derive_seed(99, "mc", i));
    double dot = 0.0;
    for_each_tensor([&](const std::string&, const auto& a, const auto& b) {
      dot += (a.array() * b.array()).sum();
    }, const_cast<ModelState&>(est.grad), const_cast<ModelState&>(exact));
    const double proj = dot / exact_norm2;
    sum += proj;
    sum2 += proj * proj;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  EXPECT_LE(std::abs(mean - 1.0), 3 * se) << "mean " << mean << " se " << se;
}

TEST_F(ReinforceTest, SmallStepDoesNotDecreaseExpectedReward) {
  const RewardWeights w;
  ASSERT_GT(std::sqrt(exact_reward_gradient(model, record, w, config).squared_norm()), 1e-3);
  const double before = exact_expected_reward(model, record, w, config);
  OptimizerConfig oc;
  oc.lr = 1e-4;
  oc.warmup_fraction = 0.0;
  Adam adam(model, oc);
  ModelState m = model;
  RewardBaseline b{0.5, 0.99};
  const std::vector<const PairRecord*> batch{&record};
  const auto stats = reinforce_step(batch, m, config, w, b, adam, 7);
  EXPECT_GE(exact_expected_reward(m, record, w, config), before - 1e-6);
  EXPECT_TRUE(stats.mean_reward.has_value());
  EXPECT_DOUBLE_EQ(b.value, 0.99 * 0.5 + 0.01 * *stats.mean_reward);
}

TEST_F(ReinforceTest, GradientIsDeterministicGivenSeed) {
  const RewardWeights w;
  const std::vector<const PairRecord*> batch{&record};
  const auto a = reinforce_gradient(batch, model, config, w, 0.1, 5);
  const auto b = reinforce_gradient(batch, model, config, w, 0.1, 5);
  EXPECT_TRUE(a.grad == b.grad);
  EXPECT_EQ(a.mean_reward, b.mean_reward);
}

}  // namespace
}  // namespace contextguard
