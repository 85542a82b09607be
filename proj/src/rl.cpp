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

#include "contextguard/rl.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace contextguard {

namespace {

double clip(double s) { return std::clamp(s, kScoreClip, 1.0 - kScoreClip); }

double branch_log_prob(double score, bool consistent) {
  const double s = clip(score);
  return consistent ? std::log(s) : std::log1p(-s);
}

double branch_prob(double score, bool consistent) {
  return consistent ? score : 1.0 - score;
}

}  // namespace

void RewardWeights::validate() const {
  bool any_positive = lambda0 > 0.0;
  if (!(lambda0 >= 0.0) || !std::isfinite(lambda0)) {
    throw ConfigError("reward.lambda0 must be a finite value >= 0");
  }
  for (double l : lambda_k) {
    if (!(l >= 0.0) || !std::isfinite(l)) {
      throw ConfigError("reward.lambda_k must be finite values >= 0");
    }
    any_positive = any_positive || l > 0.0;
  }
  if (!any_positive) throw ConfigError("at least one reward weight must be > 0");
}

double RewardWeights::max_reward(
    std::span<const ContextDimension> annotated) const {
  double bonus = 0.0;
  for (auto d : annotated) bonus += lambda_k[index_of(d)];
  return lambda0 + bonus;
}

double reward(const ActionProfile& action, const PairRecord& truth,
              const RewardWeights& w) {
  for (int k = 0; k < kNumDimensions; ++k) {
    if (action.per_dimension[k].has_value() != truth.ctxt_labels[k].has_value()) {
      throw std::invalid_argument(
          "action dimensions do not match annotated dimensions of " + truth.id +
          " at " + std::string(to_string(kAllDimensions[k])));
    }
  }
  if (action.overall != truth.overall_consistent) return 0.0;
  double bonus = 0.0;
  for (int k = 0; k < kNumDimensions; ++k) {
    if (truth.ctxt_labels[k] && *action.per_dimension[k] == *truth.ctxt_labels[k]) {
      bonus += w.lambda_k[k];
    }
  }
  return w.lambda0 + bonus;
}

SampledAction sample_action(const VerdictScores& scores,
                            std::span<const ContextDimension> annotated,
                            Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SampledAction out;
  out.action.overall = u(rng) < scores.overall;
  for (auto d : annotated) {
    const int k = index_of(d);
    out.action.per_dimension[k] = u(rng) < scores.per_dimension[k];
  }
  out.log_prob = action_log_prob(scores, out.action);
  return out;
}

double action_log_prob(const VerdictScores& scores,
                       const ActionProfile& action) {
  double lp = branch_log_prob(scores.overall, action.overall);
  for (int k = 0; k < kNumDimensions; ++k) {
    if (action.per_dimension[k]) {
      lp += branch_log_prob(scores.per_dimension[k], *action.per_dimension[k]);
    }
  }
  return lp;
}

Logits log_prob_grad_logits(const VerdictScores& scores,
                            const ActionProfile& action) {
  Logits g;
  g.overall = (action.overall ? 1.0 : 0.0) - scores.overall;
  for (int k = 0; k < kNumDimensions; ++k) {
    if (action.per_dimension[k]) {
      g.per_dimension[k] =
          (*action.per_dimension[k] ? 1.0 : 0.0) - scores.per_dimension[k];
    }
  }
  return g;
}

std::vector<ActionProfile> enumerate_actions(
    std::span<const ContextDimension> annotated) {
  const std::size_t m = annotated.size() + 1;
  if (m > 20) {
    throw std::invalid_argument("too many action components to enumerate");
  }
  std::vector<ActionProfile> out;
  out.reserve(std::size_t{1} << m);
  for (std::size_t bits = 0; bits < (std::size_t{1} << m); ++bits) {
    ActionProfile a;
    a.overall = (bits & 1) != 0;
    for (std::size_t i = 0; i < annotated.size(); ++i) {
      a.per_dimension[index_of(annotated[i])] = ((bits >> (i + 1)) & 1) != 0;
    }
    out.push_back(a);
  }
  return out;
}

namespace {

double action_prob(const VerdictScores& s, const ActionProfile& a) {
  double p = branch_prob(s.overall, a.overall);
  for (int k = 0; k < kNumDimensions; ++k) {
    if (a.per_dimension[k]) p *= branch_prob(s.per_dimension[k], *a.per_dimension[k]);
  }
  return p;
}

}  // namespace

double exact_expected_reward(const VerdictScores& scores,
                             const PairRecord& record, const RewardWeights& w) {
  const auto annotated = record.annotated_dimensions();
  double e = 0.0;
  for (const auto& a : enumerate_actions(annotated)) {
    e += action_prob(scores, a) * reward(a, record, w);
  }
  return e;
}

double exact_expected_reward(const ModelState& model, const PairRecord& record,
                             const RewardWeights& w, const ModelConfig& config) {
  return exact_expected_reward(forward(record, model, config), record, w);
}

Logits exact_reward_grad_logits(const VerdictScores& scores,
                                const PairRecord& record,
                                const RewardWeights& w) {
  const auto annotated = record.annotated_dimensions();
  Logits g;
  for (const auto& a : enumerate_actions(annotated)) {
    const double pr = action_prob(scores, a) * reward(a, record, w);
    if (pr == 0.0) continue;
    const Logits d = log_prob_grad_logits(scores, a);
    g.overall += pr * d.overall;
    for (int k = 0; k < kNumDimensions; ++k) g.per_dimension[k] += pr * d.per_dimension[k];
  }
  return g;
}

ModelState exact_reward_gradient(const ModelState& model,
                                 const PairRecord& record,
                                 const RewardWeights& w,
                                 const ModelConfig& config) {
  ForwardCache cache;
  const VerdictScores s = forward(record, model, config, nullptr, &cache);
  ModelState grad = model.zeros_like();
  backward(cache, exact_reward_grad_logits(s, record, w), model, config, grad);
  return grad;
}

ReinforceEstimate reinforce_gradient(std::span<const PairRecord* const> batch,
                                     const ModelState& model,
                                     const ModelConfig& config,
                                     const RewardWeights& w, double baseline,
                                     std::uint64_t seed) {
  if (batch.empty()) throw std::invalid_argument("reinforce: empty batch");
  ReinforceEstimate est{model.zeros_like(), 0.0};
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  ForwardCache cache;
  for (const PairRecord* r : batch) {
    Rng rng(derive_seed(seed, r->id));
    const VerdictScores s = forward(*r, model, config, &rng, &cache);
    const auto annotated = r->annotated_dimensions();
    const SampledAction a = sample_action(s, annotated, rng);
    const double R = reward(a.action, *r, w);
    est.mean_reward += inv_n * R;
    const double adv = (R - baseline) * inv_n;
    if (adv == 0.0) continue;
    Logits g = log_prob_grad_logits(s, a.action);
    g.overall *= adv;
    for (double& x : g.per_dimension) x *= adv;
    backward(cache, g, model, config, est.grad);
  }
  return est;
}

TrainStats reinforce_step(std::span<const PairRecord* const> batch,
                          ModelState& model, const ModelConfig& config,
                          const RewardWeights& w, RewardBaseline& baseline,
                          Adam& optimizer, std::uint64_t seed,
                          bool freeze_backbone) {
  ReinforceEstimate est =
      reinforce_gradient(batch, model, config, w, baseline.value, seed);
  TrainStats stats;
  stats.phase = "rl";
  stats.records = batch.size();
  stats.lr = optimizer.current_lr();
  stats.mean_reward = est.mean_reward;
  stats.baseline = baseline.value;
  const double norm2 = est.grad.squared_norm();
  if (!std::isfinite(norm2) || !est.grad.all_finite()) {
    std::ostringstream msg;
    msg << "non-finite policy gradient at optimizer step " << optimizer.steps()
        << " (mean reward " << est.mean_reward << ", baseline "
        << baseline.value << ", first record " << batch.front()->id << ")";
    throw TrainingDivergence(msg.str());
  }
  stats.grad_norm = std::sqrt(norm2);
  // Adam descends; negate to ascend on E[R].
  est.grad.add_scaled(est.grad, -2.0);
  optimizer.step(model, est.grad, freeze_backbone);
  baseline.update(est.mean_reward);
  stats.step = optimizer.steps();
  return stats;
}

}  // namespace contextguard
