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

#include "contextguard/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace contextguard {

namespace {

constexpr std::array<std::pair<const char*, double>, 3> kLevels = {{
    {"full", 1.0}, {"medium", 0.67}, {"subtle", 0.34}}};

constexpr Target kAllTargets[] = {
    Target::kPER,       Target::kLOC,        Target::kEVT,
    Target::kSentiment, Target::kNarrative,  Target::kBackground,
    Target::kTemporalSpatial, Target::kLogicalCoherence};

double clip(double s) { return std::clamp(s, kScoreClip, 1.0 - kScoreClip); }

}  // namespace

std::string Strategy::name() const {
  return std::string(to_string(target)) + "/" + level;
}

double level_difficulty(const std::string& level) {
  for (const auto& [name, d] : kLevels) {
    if (level == name) return d;
  }
  throw ConfigError("unknown perturbation level '" + level + "'");
}

Strategy parse_strategy(const std::string& name) {
  const auto slash = name.find('/');
  if (slash == std::string::npos) {
    throw ConfigError("strategy '" + name + "' is not <target>/<level>");
  }
  Strategy s;
  try {
    s.target = parse_target(name.substr(0, slash));
  } catch (const std::exception&) {
    throw ConfigError("strategy '" + name + "' has an unknown target");
  }
  s.level = name.substr(slash + 1);
  s.difficulty = level_difficulty(s.level);
  return s;
}

void GeneratorPolicy::validate() const {
  if (strategy_weights.empty()) throw ConfigError("generator has no strategies");
  double sum = 0.0;
  for (const auto& [name, w] : strategy_weights) {
    parse_strategy(name);
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("strategy weight of " + name + " must be finite and >= 0");
    }
    sum += w;
  }
  if (!(sum > 0.0)) throw ConfigError("strategy weights must sum to > 0");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("generator temperature must be > 0");
  }
  if (!(floor >= 0.0) || floor * strategy_weights.size() >= 1.0) {
    throw ConfigError("generator floor must be >= 0 and leave mass to share");
  }
}

std::map<std::string, double> GeneratorPolicy::normalized() const {
  double sum = 0.0;
  for (const auto& [name, w] : strategy_weights) sum += w;
  std::map<std::string, double> out;
  for (const auto& [name, w] : strategy_weights) out[name] = w / sum;
  return out;
}

double GeneratorPolicy::entropy() const {
  double h = 0.0;
  for (const auto& [name, p] : normalized()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

GeneratorPolicy GeneratorPolicy::make_default() {
  GeneratorPolicy p;
  for (Target t : kAllTargets) {
    for (const auto& [level, d] : kLevels) {
      p.strategy_weights[Strategy{t, level, d}.name()] = 1.0;
    }
  }
  return p;
}

PairRecord generate_fake(const PairRecord& pair, const GeneratorPolicy& policy,
                         Rng& rng, const SyntheticWorld& world) {
  if (!pair.overall_consistent) {
    throw std::invalid_argument("generate_fake needs a consistent pair");
  }
  const auto plantable = plantable_targets(pair, world);
  std::vector<Strategy> options;
  std::vector<double> weights;
  for (const auto& [name, w] : policy.strategy_weights) {
    const Strategy s = parse_strategy(name);
    if (std::find(plantable.begin(), plantable.end(), s.target) ==
        plantable.end()) {
      continue;
    }
    options.push_back(s);
    weights.push_back(std::pow(w, 1.0 / policy.temperature));
  }
  if (options.empty()) {
    throw std::invalid_argument("no generator strategy applies to " + pair.id);
  }
  if (std::all_of(weights.begin(), weights.end(),
                  [](double w) { return w <= 0.0; })) {
    std::fill(weights.begin(), weights.end(), 1.0);
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  const Strategy& s = options[pick(rng)];
  PairRecord fake = plant_inconsistency(pair, s.target, rng, s.difficulty, world);
  fake.perturbation->method = s.name();
  return fake;
}

namespace {

// Discriminator loss plus aux_weight times the mean per-dimension BCE over
// every present label of both halves. Also returns the overall scores.
LossResult adversarial_loss(const AdvBatch& batch, const ModelState& model,
                            const ModelConfig& config, double aux_weight,
                            Rng* rng, std::vector<double>* real_scores,
                            std::vector<double>* fake_scores) {
  if (batch.real.empty() || batch.fake.empty()) {
    throw std::invalid_argument("adversarial batch needs both halves");
  }
  std::size_t n_dim = 0;
  if (aux_weight > 0.0) {
    for (const auto* half : {&batch.real, &batch.fake}) {
      for (const auto& r : *half) n_dim += r.annotated_dimensions().size();
    }
  }
  const double inv_d = n_dim == 0 ? 0.0 : aux_weight / static_cast<double>(n_dim);

  LossResult out{0.0, model.zeros_like()};
  ForwardCache cache;
  for (int half = 0; half < 2; ++half) {
    const auto& records = half == 0 ? batch.real : batch.fake;
    auto* scores = half == 0 ? real_scores : fake_scores;
    const bool target = half == 0;
    const double inv_n = 1.0 / static_cast<double>(records.size());
    for (const auto& r : records) {
      const VerdictScores s = forward(r, model, config, rng, &cache);
      if (scores) scores->push_back(s.overall);
      Logits g;
      const double c = clip(s.overall);
      out.loss -= inv_n * (target ? std::log(c) : std::log1p(-c));
      g.overall = inv_n * bce_grad_logit(s.overall, target);
      if (inv_d > 0.0) {
        for (int k = 0; k < kNumDimensions; ++k) {
          if (!r.ctxt_labels[k]) continue;
          out.loss += inv_d * bce(s.per_dimension[k], *r.ctxt_labels[k]);
          g.per_dimension[k] =
              inv_d * bce_grad_logit(s.per_dimension[k], *r.ctxt_labels[k]);
        }
      }
      backward(cache, g, model, config, out.grads);
    }
  }
  return out;
}

}  // namespace

LossResult discriminator_loss(const AdvBatch& batch, const ModelState& model,
                              const ModelConfig& config, Rng* rng) {
  return adversarial_loss(batch, model, config, 0.0, rng, nullptr, nullptr);
}

GeneratorPolicy generator_update(
    const GeneratorPolicy& policy,
    const std::vector<std::pair<std::string, double>>& fake_scores,
    double step_size) {
  if (!policy.trainable) return policy;
  std::map<std::string, std::pair<double, int>> margin;
  for (const auto& [name, s] : fake_scores) {
    auto& m = margin[name];
    m.first += s - 0.5;
    m.second += 1;
  }
  GeneratorPolicy out = policy;
  auto weights = out.normalized();
  for (auto& [name, w] : weights) {
    auto it = margin.find(name);
    if (it != margin.end()) {
      w *= std::exp(step_size * it->second.first / it->second.second);
    }
  }
  // Pin every weight that would fall under the floor to it and rescale the
  // rest to the remaining mass, until no free weight drops below.
  double sum = 0.0;
  for (const auto& [name, w] : weights) sum += w;
  for (auto& [name, w] : weights) w /= sum;
  std::map<std::string, bool> pinned;
  for (bool changed = true; changed;) {
    changed = false;
    double free_mass = 0.0;
    std::size_t n_pinned = 0;
    for (const auto& [name, w] : weights) {
      if (pinned[name]) {
        ++n_pinned;
      } else {
        free_mass += w;
      }
    }
    const double scale = (1.0 - policy.floor * n_pinned) / free_mass;
    for (const auto& [name, w] : weights) {
      if (!pinned[name] && w * scale < policy.floor) {
        pinned[name] = true;
        changed = true;
      }
    }
    if (!changed) {
      for (auto& [name, w] : weights) w = pinned[name] ? policy.floor : w * scale;
    }
  }
  out.strategy_weights = weights;
  return out;
}

void AdversarialConfig::validate() const {
  if (!(aux_weight >= 0.0)) throw ConfigError("adversarial.aux_weight must be >= 0");
  if (!(generator_step >= 0.0)) {
    throw ConfigError("adversarial.generator_step must be >= 0");
  }
}

TrainStats adversarial_epoch(std::span<const PairRecord* const> train,
                             ModelState& model, const ModelConfig& config,
                             GeneratorPolicy& policy,
                             const AdversarialConfig& adv,
                             const OptimizerConfig& opt, Adam& optimizer,
                             Rng& rng, const SyntheticWorld& world,
                             bool freeze_backbone,
                             const std::function<void(const TrainStats&)>& on_step) {
  std::vector<const PairRecord*> real, natural;
  for (const PairRecord* r : train) {
    (r->overall_consistent ? real : natural).push_back(r);
  }
  if (real.empty()) {
    throw DataError("adversarial training needs consistent training records");
  }
  std::shuffle(real.begin(), real.end(), rng);

  TrainStats epoch;
  epoch.phase = "adversarial";
  double loss_sum = 0.0, real_sum = 0.0, fake_sum = 0.0;
  std::size_t n_real = 0, n_fake = 0, n_steps = 0;
  // batch_size counts both halves.
  const auto bs = std::max<std::size_t>(1, static_cast<std::size_t>(opt.batch_size) / 2);
  for (std::size_t begin = 0; begin < real.size(); begin += bs) {
    const std::size_t end = std::min(real.size(), begin + bs);
    AdvBatch batch;
    std::vector<std::string> strategy;
    for (std::size_t i = begin; i < end; ++i) {
      batch.real.push_back(*real[i]);
      if (adv.include_natural_fakes && !natural.empty() &&
          std::uniform_int_distribution<int>(0, 1)(rng) == 1) {
        const auto j = std::uniform_int_distribution<std::size_t>(
            0, natural.size() - 1)(rng);
        batch.fake.push_back(*natural[j]);
        strategy.emplace_back();
      } else {
        batch.fake.push_back(generate_fake(*real[i], policy, rng, world));
        strategy.push_back(batch.fake.back().perturbation->method);
      }
    }
    std::vector<double> real_scores, fake_scores;
    LossResult lr = adversarial_loss(batch, model, config, adv.aux_weight,
                                     config.encoder.noise_std > 0 ? &rng : nullptr,
                                     &real_scores, &fake_scores);
    const double norm2 = lr.grads.squared_norm();
    if (!std::isfinite(lr.loss) || !std::isfinite(norm2)) {
      std::ostringstream msg;
      msg << "non-finite discriminator loss or gradient at optimizer step "
          << optimizer.steps() << " (loss " << lr.loss << ")";
      throw TrainingDivergence(msg.str());
    }
    TrainStats step;
    step.phase = "adversarial";
    step.epoch = epoch.epoch;
    step.records = batch.real.size() + batch.fake.size();
    step.lr = optimizer.current_lr();
    step.loss = lr.loss;
    step.grad_norm = std::sqrt(norm2);
    optimizer.step(model, lr.grads, freeze_backbone);
    step.step = optimizer.steps();

    std::vector<std::pair<std::string, double>> scored;
    for (std::size_t i = 0; i < fake_scores.size(); ++i) {
      if (!strategy[i].empty()) scored.emplace_back(strategy[i], fake_scores[i]);
    }
    policy = generator_update(policy, scored, adv.generator_step);

    double rs = 0.0, fs = 0.0;
    for (double s : real_scores) rs += s;
    for (double s : fake_scores) fs += s;
    step.mean_real_score = rs / real_scores.size();
    step.mean_fake_score = fs / fake_scores.size();
    step.generator_entropy = policy.entropy();
    if (on_step) on_step(step);

    loss_sum += lr.loss;
    real_sum += rs;
    fake_sum += fs;
    n_real += real_scores.size();
    n_fake += fake_scores.size();
    ++n_steps;
  }
  epoch.step = optimizer.steps();
  epoch.records = n_real + n_fake;
  epoch.lr = optimizer.current_lr();
  epoch.loss = loss_sum / static_cast<double>(n_steps);
  epoch.mean_real_score = real_sum / static_cast<double>(n_real);
  epoch.mean_fake_score = fake_sum / static_cast<double>(n_fake);
  epoch.generator_entropy = policy.entropy();
  return epoch;
}

}  // namespace contextguard
