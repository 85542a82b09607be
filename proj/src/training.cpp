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

#include "contextguard/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace contextguard {

std::string_view to_string(Paradigm p) {
  switch (p) {
    case Paradigm::kSupervised: return "supervised";
    case Paradigm::kRl: return "rl";
    case Paradigm::kAdversarial: return "adversarial";
  }
  return "?";
}

Paradigm parse_paradigm(std::string_view name) {
  if (name == "supervised") return Paradigm::kSupervised;
  if (name == "rl") return Paradigm::kRl;
  if (name == "adversarial") return Paradigm::kAdversarial;
  throw ConfigError("unknown paradigm '" + std::string(name) +
                    "' (expected supervised, rl or adversarial)");
}

void TrainConfig::validate() const {
  model.validate();
  optimizer.validate();
  if (!(dim_weight >= 0.0)) throw ConfigError("train.dim_weight must be >= 0");
  reward.validate();
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) {
    throw ConfigError("reward.baseline_decay must lie in [0,1)");
  }
  adversarial.validate();
  generator.validate();
}

ModelConfig resolve_model_config(ModelConfig config,
                                 const SyntheticWorld& world) {
  if (config.encoder.vocab_size == 0) {
    config.encoder.vocab_size = world.grammar.vocab_size();
  }
  config.encoder.scene_vocab = world.vocab;
  return config;
}

ModelState initial_model(const ModelConfig& config, const SyntheticWorld& world,
                         std::uint64_t seed) {
  return ModelState::initialize(config, raw_scene_dim(world.vocab),
                                derive_seed(seed, "model"));
}

namespace {

long ceil_div(std::size_t a, std::size_t b) {
  return static_cast<long>((a + b - 1) / b);
}

void check_finite(const LossResult& lr, const Adam& opt) {
  if (!std::isfinite(lr.loss) || !lr.grads.all_finite()) {
    std::ostringstream msg;
    msg << "non-finite supervised loss or gradient at optimizer step "
        << opt.steps() << " (loss " << lr.loss << ")";
    throw TrainingDivergence(msg.str());
  }
}

}  // namespace

TrainResult train(std::span<const PairRecord> records,
                  const SyntheticWorld& world, const TrainConfig& config,
                  const std::function<void(const TrainStats&)>& on_epoch) {
  const ModelConfig mc = resolve_model_config(config.model, world);
  {
    TrainConfig resolved = config;
    resolved.model = mc;
    resolved.validate();
  }
  std::vector<const PairRecord*> train_set;
  for (const auto& r : records) {
    if (r.split == Split::kTrain) train_set.push_back(&r);
  }
  if (train_set.empty()) throw DataError("no training records");

  TrainResult result{initial_model(mc, world, config.seed), {},
                     config.generator};
  ModelState& model = result.model;
  const auto bs = static_cast<std::size_t>(config.optimizer.batch_size);
  const int epochs = config.optimizer.epochs;

  std::size_t per_epoch = train_set.size();
  if (config.paradigm == Paradigm::kAdversarial) {
    per_epoch = static_cast<std::size_t>(std::count_if(
        train_set.begin(), train_set.end(),
        [](const PairRecord* r) { return r->overall_consistent; }));
    if (per_epoch == 0) {
      throw DataError("adversarial training needs consistent training records");
    }
  }
  const std::size_t step_records =
      config.paradigm == Paradigm::kAdversarial ? std::max<std::size_t>(1, bs / 2)
                                                : bs;
  Adam optimizer(model, config.optimizer,
                 epochs * ceil_div(per_epoch, step_records));

  auto emit = [&](TrainStats s) {
    result.log.push_back(s);
    if (on_epoch) on_epoch(result.log.back());
  };

  {
    TrainStats init;
    init.phase = "init";
    init.records = train_set.size();
    init.lr = optimizer.current_lr();
    init.loss = supervised_loss(std::span<const PairRecord* const>(train_set),
                                model, mc, config.dim_weight)
                    .loss;
    emit(init);
  }

  RewardBaseline baseline{0.0, config.baseline_decay};
  Rng adv_rng(derive_seed(config.seed, "adversarial"));
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    if (config.paradigm == Paradigm::kAdversarial) {
      TrainStats s = adversarial_epoch(train_set, model, mc, result.generator,
                                       config.adversarial, config.optimizer,
                                       optimizer, adv_rng, world,
                                       config.freeze_backbone);
      s.epoch = epoch;
      emit(s);
      continue;
    }

    std::vector<const PairRecord*> order = train_set;
    Rng shuffle(derive_seed(config.seed, "shuffle", epoch));
    std::shuffle(order.begin(), order.end(), shuffle);
    TrainStats s;
    s.phase = std::string(to_string(config.paradigm));
    s.epoch = epoch;
    s.records = order.size();
    double total = 0.0, norm = 0.0;
    long n_steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += bs) {
      const std::span<const PairRecord* const> batch(
          order.data() + begin, std::min(bs, order.size() - begin));
      if (config.paradigm == Paradigm::kSupervised) {
        Rng noise(derive_seed(config.seed, "noise", optimizer.steps()));
        LossResult lr = supervised_loss(
            batch, model, mc, config.dim_weight,
            mc.encoder.noise_std > 0 ? &noise : nullptr);
        check_finite(lr, optimizer);
        total += lr.loss;
        norm += std::sqrt(lr.grads.squared_norm());
        optimizer.step(model, lr.grads, config.freeze_backbone);
      } else {
        const TrainStats st = reinforce_step(
            batch, model, mc, config.reward, baseline, optimizer,
            derive_seed(config.seed, "rl", optimizer.steps()),
            config.freeze_backbone);
        total += *st.mean_reward;
        norm += *st.grad_norm;
      }
      ++n_steps;
    }
    s.step = optimizer.steps();
    s.lr = optimizer.current_lr();
    s.grad_norm = norm / static_cast<double>(n_steps);
    if (config.paradigm == Paradigm::kSupervised) {
      s.loss = total / static_cast<double>(n_steps);
    } else {
      s.mean_reward = total / static_cast<double>(n_steps);
      s.baseline = baseline.value;
    }
    emit(s);
  }
  return result;
}

}  // namespace contextguard
