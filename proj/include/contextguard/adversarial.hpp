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

// Adversarial training. The generator is a categorical policy over
// perturbation strategies named "<Target>/<level>", e.g. "Sentiment/subtle".
// A strategy plants one inconsistency of that target at the level's
// difficulty. The discriminator is the model's overall head.

#ifndef CONTEXTGUARD_ADVERSARIAL_HPP_
#define CONTEXTGUARD_ADVERSARIAL_HPP_

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "contextguard/datagen.hpp"
#include "contextguard/fccr.hpp"
#include "contextguard/optim.hpp"

namespace contextguard {

struct Strategy {
  Target target = Target::kPER;
  std::string level;
  double difficulty = 1.0;

  std::string name() const;
};

// Levels: "full" (1.0), "medium" (0.67), "subtle" (0.34).
double level_difficulty(const std::string& level);
Strategy parse_strategy(const std::string& name);

struct GeneratorPolicy {
  std::map<std::string, double> strategy_weights;
  double temperature = 1.0;
  bool trainable = true;
  // Normalized weights never drop below this, so no strategy dies out.
  double floor = 1e-3;

  void validate() const;
  // Weights scaled to sum to 1.
  std::map<std::string, double> normalized() const;
  double entropy() const;

  // Uniform over every target and level.
  static GeneratorPolicy make_default();
};

struct AdvBatch {
  std::vector<PairRecord> real;
  std::vector<PairRecord> fake;
};

// Samples a strategy among those whose target is plantable on `pair`
// (weights ** (1 / temperature), renormalized) and plants it. The fake
// keeps the source id and records the strategy name as perturbation method.
// Throws std::invalid_argument for an inconsistent pair or one with
// nothing to perturb.
PairRecord generate_fake(const PairRecord& pair, const GeneratorPolicy& policy,
                         Rng& rng, const SyntheticWorld& world);

// -( mean_real log S + mean_fake log(1 - S) ) on clipped scores.
LossResult discriminator_loss(const AdvBatch& batch, const ModelState& model,
                              const ModelConfig& config, Rng* rng = nullptr);

// Multiplies each strategy's weight by exp(step * mean(S - 0.5)) over the
// fakes it produced, then renormalizes and applies the floor. Identity when
// the policy is not trainable.
GeneratorPolicy generator_update(
    const GeneratorPolicy& policy,
    const std::vector<std::pair<std::string, double>>& fake_scores,
    double step_size);

struct AdversarialConfig {
  double aux_weight = 0.5;
  double generator_step = 1.0;
  bool include_natural_fakes = false;

  void validate() const;
};

// One pass over the consistent training records in batches of
// batch_size / 2. Each batch gets an equal number of fresh fakes, one
// discriminator step (plus aux_weight times the per-dimension supervised
// loss over real and fake records) and one generator update. on_step, if set, receives per-step stats.
TrainStats adversarial_epoch(std::span<const PairRecord* const> train,
                             ModelState& model, const ModelConfig& config,
                             GeneratorPolicy& policy,
                             const AdversarialConfig& adv,
                             const OptimizerConfig& opt, Adam& optimizer,
                             Rng& rng, const SyntheticWorld& world,
                             bool freeze_backbone = false,
                             const std::function<void(const TrainStats&)>&
                                 on_step = nullptr);

}  // namespace contextguard

#endif  // CONTEXTGUARD_ADVERSARIAL_HPP_
