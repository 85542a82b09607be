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

#include "contextguard/adversarial.hpp"
#include "contextguard/training.hpp"
#include "test_util.hpp"

namespace contextguard {
namespace {

using testing::small_corpus;
using testing::small_world;
using testing::tiny_config;

class AdversarialTest : public ::testing::Test {
 protected:
  SyntheticWorld world = small_world();
  ModelConfig config = tiny_config(world);
  ModelState model = initial_model(config, world, 5);

  PairRecord consistent(DatasetProfile profile, std::uint64_t seed) {
    Rng rng(seed);
    return make_consistent_record("c" + std::to_string(seed),
                                  generate_scene(world, rng), profile, world);
  }

  AdvBatch batch(std::size_t n, std::uint64_t seed) {
    AdvBatch b;
    Rng rng(seed);
    const auto policy = GeneratorPolicy::make_default();
    for (std::size_t i = 0; i < n; ++i) {
      b.real.push_back(consistent(kAllProfiles[i % 3], seed * 100 + i));
      b.fake.push_back(generate_fake(b.real.back(), policy, rng, world));
    }
    return b;
  }
};

TEST(Strategy, NamesAndLevels) {
  const Strategy s = parse_strategy("Sentiment/subtle");
  EXPECT_EQ(s.target, Target::kSentiment);
  EXPECT_DOUBLE_EQ(s.difficulty, 0.34);
  EXPECT_EQ(s.name(), "Sentiment/subtle");
  EXPECT_DOUBLE_EQ(level_difficulty("medium"), 0.67);
  EXPECT_THROW(parse_strategy("Sentiment"), ConfigError);
  EXPECT_THROW(parse_strategy("Nope/full"), ConfigError);
  EXPECT_THROW(parse_strategy("PER/extreme"), ConfigError);
  const auto p = GeneratorPolicy::make_default();
  EXPECT_EQ(p.strategy_weights.size(), 24u);
  EXPECT_NEAR(p.entropy(), std::log(24.0), 1e-12);
}

TEST_F(AdversarialTest, ConcentratedPolicyFlipsOnlySentiment) {
  GeneratorPolicy p;
  p.strategy_weights = {{"Sentiment/full", 1.0}};
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const PairRecord r = consistent(DatasetProfile::kTamperedNewsEnt, i);
    const PairRecord f = generate_fake(r, p, rng, world);
    EXPECT_FALSE(f.overall_consistent);
    EXPECT_EQ(f.label(ContextDimension::kSentiment), std::optional<bool>(false));
    EXPECT_EQ(f.label(ContextDimension::kNarrative), std::optional<bool>(true));
    EXPECT_EQ(f.entity_labels, r.entity_labels);
    EXPECT_EQ(f.perturbation->method, "Sentiment/full");
    EXPECT_EQ(f.perturbation->source_id, r.id);
  }
}

TEST_F(AdversarialTest, FakesAreAlwaysInconsistentWithOnePlantedLabel) {
  const auto policy = GeneratorPolicy::make_default();
  Rng rng(9);
  for (int i = 0; i < 300; ++i) {
    const PairRecord r = consistent(kAllProfiles[i % 3], 1000 + i);
    const PairRecord f = generate_fake(r, policy, rng, world);
    EXPECT_FALSE(f.overall_consistent);
    const auto o = oracle_labels(f.scene, f.text_tokens, world);
    int failing = 0;
    for (int t = 0; t < kNumTargets; ++t) failing += !o.label(static_cast<Target>(t));
    EXPECT_EQ(failing, 1);
  }
}

TEST_F(AdversarialTest, RejectsInconsistentPair) {
  const auto policy = GeneratorPolicy::make_default();
  Rng rng(1);
  PairRecord f = generate_fake(consistent(DatasetProfile::kMMGEnt, 1), policy, rng, world);
  EXPECT_THROW(generate_fake(f, policy, rng, world), std::invalid_argument);
}

TEST_F(AdversarialTest, StrategyFrequenciesFollowWeights) {
  const PairRecord r = consistent(DatasetProfile::kTamperedNewsEnt, 2);
  GeneratorPolicy p;
  const std::vector<std::string> names = {"PER/full", "LOC/medium", "EVT/subtle",
                                          "Sentiment/full", "Narrative/medium"};
  const std::vector<double> w = {1.0, 2.0, 3.0, 4.0, 10.0};
  for (std::size_t i = 0; i < names.size(); ++i) p.strategy_weights[names[i]] = w[i];
  // Not plantable on this profile, so never drawn.
  p.strategy_weights["Background/full"] = 50.0;
  std::map<std::string, int> counts;
  Rng rng(17);
  const int n = 10000;
  for (int i = 0; i < n; ++i) counts[generate_fake(r, p, rng, world).perturbation->method]++;
  EXPECT_EQ(counts.count("Background/full"), 0u);
  for (std::size_t i = 0; i < names.size(); ++i) {
    EXPECT_NEAR(static_cast<double>(counts[names[i]]) / n, w[i] / 20.0, 0.01) << names[i];
  }
}

TEST_F(AdversarialTest, LossAtHalfScoresIsTwoLn2) {
  const auto b = batch(6, 1);
  const auto res = discriminator_loss(b, model.zeros_like(), config);
  EXPECT_NEAR(res.loss, 2 * std::log(2.0), 1e-12);
  AdvBatch empty_fake{b.real, {}};
  EXPECT_THROW(discriminator_loss(empty_fake, model, config), std::invalid_argument);
}

// Hand-built discriminator on the ablated layout: sentiment tokens of real
// pairs embed to -E and those of their fakes to +E along one axis, and every
// later layer passes that sign through a saturated tanh.
TEST_F(AdversarialTest, PerfectDiscriminatorLossNearZero) {
  const ModelConfig c = tiny_config(world, true);
  ModelState m = initial_model(c, world, 1).zeros_like();
  GeneratorPolicy sentiment;
  sentiment.strategy_weights = {{"Sentiment/full", 1.0}};
  const int bins = world.vocab.n_sentiment_bins;
  const auto& templates = world.grammar.templates[static_cast<int>(Attribute::kSentiment)];
  AdvBatch b;
  Rng rng(12);
  for (std::uint64_t seed = 0; b.real.size() < 8; ++seed) {
    PairRecord r = consistent(DatasetProfile::kTamperedNewsEnt, seed);
    const int bin = attribute_value(r.scene, Attribute::kSentiment, bins);
    if (bin >= bins / 2) continue;
    b.fake.push_back(generate_fake(r, sentiment, rng, world));
    b.real.push_back(std::move(r));
    for (int t : templates[bin]) m.embedding(t, 0) = -50.0;
    for (int t : templates[bins - 1 - bin]) m.embedding(t, 0) = 50.0;
  }
  for (int bin = 0; bin < bins / 2; ++bin) {
    for (int t : templates[bin]) ASSERT_LE(m.embedding(t, 0), 0.0);
  }
  m.text.w(0, 0) = 10.0;
  m.fuse.w(0, c.encoder.d_v) = 10.0;
  m.direct.w(0, 0) = 10.0;
  m.overall.hidden.w(0, 0) = 10.0;
  m.overall.out.w(0, 0) = -50.0;
  for (const auto& r : b.real) EXPECT_GT(forward(r, m, c).overall, 1 - 1e-9);
  for (const auto& r : b.fake) EXPECT_LT(forward(r, m, c).overall, 1e-9);
  EXPECT_NEAR(discriminator_loss(b, m, c).loss, 0.0, 1e-6);
}

double loss_oracle(const AdvBatch& b, const ModelState& m, const ModelConfig& c) {
  double real = 0.0, fake = 0.0;
  for (const auto& r : b.real) {
    real += std::log(std::clamp(forward(r, m, c).overall, 1e-9, 1 - 1e-9));
  }
  for (const auto& r : b.fake) {
    fake += std::log(1 - std::clamp(forward(r, m, c).overall, 1e-9, 1 - 1e-9));
  }
  return -(real / b.real.size() + fake / b.fake.size());
}

TEST_F(AdversarialTest, LossMatchesDirectExpectation) {
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    const auto b = batch(7, seed);
    const ModelState m = initial_model(config, world, seed);
    EXPECT_NEAR(discriminator_loss(b, m, config).loss, loss_oracle(b, m, config), 1e-12);
  }
}

TEST_F(AdversarialTest, GradientMatchesFiniteDifferences) {
  for (bool no_fccr : {false, true}) {
    const ModelConfig c = tiny_config(world, no_fccr);
    const ModelState m = initial_model(c, world, 21);
    const auto b = batch(5, 8);
    const auto res = discriminator_loss(b, m, c);
    const auto rep = testing::finite_difference_check(m, res.grads, [&](const ModelState& s) {
      return discriminator_loss(b, s, c).loss;
    });
    EXPECT_LT(rep.max_rel_error, testing::kFdTolerance) << rep.worst_path;
  }
}

TEST(GeneratorUpdate, IdentityWhenFrozen) {
  GeneratorPolicy p = GeneratorPolicy::make_default();
  p.trainable = false;
  const auto out = generator_update(p, {{"PER/full", 0.9}}, 1.0);
  EXPECT_EQ(out.strategy_weights, p.strategy_weights);
}

TEST(GeneratorUpdate, FoolingStrategyGainsWeight) {
  const GeneratorPolicy p = GeneratorPolicy::make_default();
  std::vector<std::pair<std::string, double>> scores;
  for (const auto& [name, w] : p.strategy_weights) {
    scores.emplace_back(name, name == "LOC/subtle" ? 0.9 : 0.1);
  }
  const auto before = p.normalized().at("LOC/subtle");
  const auto out = generator_update(p, scores, 1.0);
  EXPECT_GT(out.normalized().at("LOC/subtle"), before);
}

TEST(GeneratorUpdate, StaysNormalizedAndFloored) {
  GeneratorPolicy p = GeneratorPolicy::make_default();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::string> names;
  for (const auto& [name, w] : p.strategy_weights) names.push_back(name);
  for (int step = 0; step < 1000; ++step) {
    std::vector<std::pair<std::string, double>> scores;
    for (int i = 0; i < 8; ++i) {
      const auto& name = names[static_cast<std::size_t>(u(rng) * names.size()) % names.size()];
      scores.emplace_back(name, name[0] == 'P' ? 0.95 : u(rng) * 0.2);
    }
    p = generator_update(p, scores, 2.0);
    double sum = 0.0;
    for (const auto& [name, w] : p.strategy_weights) {
      ASSERT_TRUE(std::isfinite(w));
      ASSERT_GE(w, p.floor * (1 - 1e-9));
      sum += w;
    }
    ASSERT_NEAR(sum, 1.0, 1e-9);
  }
  EXPECT_NO_THROW(p.validate());
}

TEST_F(AdversarialTest, ZeroLearningRateLeavesModelUnchanged) {
  const Corpus c = small_corpus(world, 40, 0, 3);
  const auto train = testing::pointers(c.records);
  OptimizerConfig oc;
  oc.lr = 0.0;
  oc.batch_size = 8;
  Adam adam(model, oc);
  ModelState m = model;
  GeneratorPolicy p = GeneratorPolicy::make_default();
  p.trainable = false;
  Rng rng(4);
  const auto stats = adversarial_epoch(train, m, config, p, AdversarialConfig{}, oc,
                                       adam, rng, world);
  EXPECT_TRUE(m == model);
  EXPECT_EQ(p.strategy_weights, GeneratorPolicy::make_default().strategy_weights);
  EXPECT_EQ(stats.records, 80u);
  EXPECT_GT(*stats.loss, 0.0);
}

TEST_F(AdversarialTest, NoConsistentRecordsIsAnError) {
  Corpus c = small_corpus(world, 10, 10, 3);
  std::vector<const PairRecord*> bad;
  for (const auto& r : c.records) {
    if (!r.overall_consistent) bad.push_back(&r);
  }
  OptimizerConfig oc;
  Adam adam(model, oc);
  GeneratorPolicy p = GeneratorPolicy::make_default();
  Rng rng(1);
  EXPECT_THROW(adversarial_epoch(bad, model, config, p, AdversarialConfig{}, oc, adam, rng, world),
               DataError);
}

TrainConfig easy_config(const ModelConfig& model) {
  TrainConfig tc;
  tc.model = model;
  tc.paradigm = Paradigm::kAdversarial;
  tc.optimizer.lr = 3e-3;
  tc.optimizer.epochs = 25;
  tc.seed = 2;
  return tc;
}

// Two values per attribute keeps the match-or-not comparison small enough to
// learn in a few seconds.
TEST(AdversarialTraining, SeparatesRealFromFakeOnEasyCorpus) {
  const VocabConfig easy{2, 2, 2, 2, 2, 2, 2};
  const auto world = SyntheticWorld::make_default(easy);
  GenConfig g;
  g.vocab = easy;
  g.n_consistent = 500;
  g.n_inconsistent = 0;
  g.seed = 6;
  const Corpus c = split_corpus(generate_corpus(g, world), {0.8, 0.0, 0.2}, 6);
  const ModelConfig desk = resolve_model_config(ModelConfig{}, world);
  TrainConfig tc = easy_config(desk);
  tc.optimizer.epochs = 40;
  const auto res = train(c.records, world, tc);
  const GeneratorPolicy full_only = [] {
    GeneratorPolicy p;
    for (const auto& [name, w] : GeneratorPolicy::make_default().strategy_weights) {
      if (name.ends_with("/full")) p.strategy_weights[name] = 1.0;
    }
    return p;
  }();
  Rng rng(77);
  double real = 0.0, fake = 0.0;
  std::size_t n = 0;
  for (const auto& r : c.records) {
    if (r.split != Split::kTest) continue;
    real += forward(r, res.model, desk).overall;
    fake += forward(generate_fake(r, full_only, rng, world), res.model, desk).overall;
    ++n;
  }
  EXPECT_GT(real / n, fake / n + 0.2);
}

TEST_F(AdversarialTest, ReplayIsDeterministic) {
  const Corpus c = small_corpus(world, 60, 20, 6);
  TrainConfig tc = easy_config(config);
  tc.optimizer.epochs = 3;
  const auto a = train(c.records, world, tc);
  const auto b = train(c.records, world, tc);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].to_json_line(), b.log[i].to_json_line());
  }
  EXPECT_TRUE(a.model == b.model);
  EXPECT_EQ(a.generator.strategy_weights, b.generator.strategy_weights);
}

}  // namespace
}  // namespace contextguard
