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

// Multi-variant experiments shared by the CLI and the acceptance runner.

#ifndef CONTEXTGUARD_EXPERIMENTS_HPP_
#define CONTEXTGUARD_EXPERIMENTS_HPP_

#include <functional>
#include <string>
#include <vector>

#include "contextguard/config.hpp"
#include "contextguard/eval.hpp"

namespace contextguard {

struct PreparedData {
  SyntheticWorld world;
  // Split corpus plus the perturbed test records.
  Corpus corpus;
};

// Generates, splits and perturbs a corpus for `seed`.
PreparedData prepare_data(const RunConfig& config, std::uint64_t seed);

// Loads paths.corpus when set (the world is rebuilt from the vocabulary
// settings), else prepares data for config.seed.
PreparedData load_or_prepare_data(const RunConfig& config);

std::vector<PairRecord> records_in(const Corpus& corpus, Split split);

struct Variant {
  std::string name;
  Paradigm paradigm = Paradigm::kSupervised;
  bool no_fccr = false;
};

// full (adversarial), w/o FCCR, w/o RL/Adv (supervised), w/o both.
std::vector<Variant> ablation_variants();
// rl, adversarial.
std::vector<Variant> paradigm_variants();

TrainConfig variant_train_config(const RunConfig& config, const Variant& v,
                                 std::uint64_t seed);

struct VariantResult {
  std::string variant;
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;
  double test_f1 = 0.0;
  RobustnessResult robustness;
  double seconds = 0.0;
};

// Trains every variant on data prepared for each seed and scores it on the
// test split and the perturbed set. Runs (seed, variant) jobs on up to
// `workers` threads; results come back in (seed, variant) order.
std::vector<VariantResult> run_variants(
    const RunConfig& config, const std::vector<Variant>& variants,
    const std::vector<std::uint64_t>& seeds, int workers = 1,
    const std::function<void(const VariantResult&)>& on_result = nullptr);

struct VariantSummary {
  std::string variant;
  double median_accuracy = 0.0;
  double median_f1 = 0.0;
  double median_standard = 0.0;
  double median_perturbed = 0.0;
  double median_drop = 0.0;
  std::vector<double> accuracies;
};

// Medians per variant, in the order of `variants`.
std::vector<VariantSummary> summarize(const std::vector<VariantResult>& results,
                                      const std::vector<Variant>& variants);

double median(std::vector<double> values);

std::vector<std::uint64_t> seed_range(std::uint64_t first, int n);

}  // namespace contextguard

#endif  // CONTEXTGUARD_EXPERIMENTS_HPP_
