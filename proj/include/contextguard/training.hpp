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

#ifndef CONTEXTGUARD_TRAINING_HPP_
#define CONTEXTGUARD_TRAINING_HPP_

#include <functional>
#include <string>
#include <vector>

#include "contextguard/adversarial.hpp"
#include "contextguard/rl.hpp"

namespace contextguard {

enum class Paradigm { kSupervised, kRl, kAdversarial };

std::string_view to_string(Paradigm p);
Paradigm parse_paradigm(std::string_view name);

struct TrainConfig {
  ModelConfig model;
  OptimizerConfig optimizer;
  Paradigm paradigm = Paradigm::kSupervised;
  bool freeze_backbone = false;
  double dim_weight = 1.0;
  RewardWeights reward;
  double baseline_decay = 0.99;
  AdversarialConfig adversarial;
  GeneratorPolicy generator = GeneratorPolicy::make_default();
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  ModelState model;
  std::vector<TrainStats> log;
  GeneratorPolicy generator;
};

// Fills in encoder.vocab_size and encoder.scene_vocab from the world when
// they are unset.
ModelConfig resolve_model_config(ModelConfig config,
                                 const SyntheticWorld& world);

ModelState initial_model(const ModelConfig& config, const SyntheticWorld& world,
                         std::uint64_t seed);

// Trains on the records with split == train under config.paradigm. One log
// row per epoch (plus a row for the initial state); on_epoch sees each row
// as it is produced.
TrainResult train(std::span<const PairRecord> records,
                  const SyntheticWorld& world, const TrainConfig& config,
                  const std::function<void(const TrainStats&)>& on_epoch =
                      nullptr);

}  // namespace contextguard

#endif  // CONTEXTGUARD_TRAINING_HPP_
