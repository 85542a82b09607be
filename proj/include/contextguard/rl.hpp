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

// Policy-gradient training. Each pair is a one-step episode: the policy
// emits one Bernoulli action for the overall verdict and one per annotated
// dimension, with P(Consistent) equal to the corresponding score.
//
//   R = l0 [a == y] + sum_k l_k [a_k == y_k] [a == y]
//
// Per-dimension terms only pay out when the overall verdict is right.

#ifndef CONTEXTGUARD_RL_HPP_
#define CONTEXTGUARD_RL_HPP_

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "contextguard/fccr.hpp"
#include "contextguard/optim.hpp"

namespace contextguard {

struct RewardWeights {
  double lambda0 = 1.0;
  std::array<double, kNumDimensions> lambda_k = {0.2, 0.2, 0.2, 0.2, 0.2};

  void validate() const;
  // Largest reward attainable on a record annotating these dimensions.
  double max_reward(std::span<const ContextDimension> annotated) const;
};

// true = Consistent.
struct ActionProfile {
  bool overall = true;
  std::array<std::optional<bool>, kNumDimensions> per_dimension;
};

// Throws std::invalid_argument unless the action's dimensions are exactly
// the record's annotated dimensions.
double reward(const ActionProfile& action, const PairRecord& truth,
              const RewardWeights& w);

struct SampledAction {
  ActionProfile action;
  double log_prob = 0.0;
};

SampledAction sample_action(const VerdictScores& scores,
                            std::span<const ContextDimension> annotated,
                            Rng& rng);

double action_log_prob(const VerdictScores& scores,
                       const ActionProfile& action);

// d log pi(action) / d logits: (a - S) for every sampled component.
Logits log_prob_grad_logits(const VerdictScores& scores,
                            const ActionProfile& action);

// Every action profile over the overall verdict and the annotated
// dimensions, overall bit first. Throws std::invalid_argument past 20
// components.
std::vector<ActionProfile> enumerate_actions(
    std::span<const ContextDimension> annotated);

// E[R] under the policy given by `scores`, by enumeration.
double exact_expected_reward(const VerdictScores& scores,
                             const PairRecord& record, const RewardWeights& w);
double exact_expected_reward(const ModelState& model, const PairRecord& record,
                             const RewardWeights& w, const ModelConfig& config);

// dE[R]/dlogits: sum_a P(a) R(a) (a - S).
Logits exact_reward_grad_logits(const VerdictScores& scores,
                                const PairRecord& record,
                                const RewardWeights& w);
// dE[R]/dtheta.
ModelState exact_reward_gradient(const ModelState& model,
                                 const PairRecord& record,
                                 const RewardWeights& w,
                                 const ModelConfig& config);

struct RewardBaseline {
  double value = 0.0;
  double decay = 0.99;

  void update(double mean_reward) {
    value = decay * value + (1.0 - decay) * mean_reward;
  }
};

struct ReinforceEstimate {
  ModelState grad;  // ascent direction for E[R]
  double mean_reward = 0.0;
};

// mean_r (R_r - baseline) * grad log pi(a_r). Each record draws from its own
// stream Rng(derive_seed(seed, record.id)).
ReinforceEstimate reinforce_gradient(std::span<const PairRecord* const> batch,
                                     const ModelState& model,
                                     const ModelConfig& config,
                                     const RewardWeights& w, double baseline,
                                     std::uint64_t seed);

// Estimate, Adam ascent step, then baseline update. Throws
// TrainingDivergence on a non-finite gradient and std::invalid_argument on
// an empty batch.
TrainStats reinforce_step(std::span<const PairRecord* const> batch,
                          ModelState& model, const ModelConfig& config,
                          const RewardWeights& w, RewardBaseline& baseline,
                          Adam& optimizer, std::uint64_t seed,
                          bool freeze_backbone = false);

}  // namespace contextguard

#endif  // CONTEXTGUARD_RL_HPP_
