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

// Synthetic corpus with oracle labels.
//
// A scene is rendered to text by a template grammar: for each attribute, in
// a fixed order, one connective token followed by that attribute's value
// template. Templates of one attribute share a length and differ from each
// other at every position, so any mixture of two templates parses as
// "unknown". Labels are recomputed from text alone by parse_text +
// oracle_labels, which makes every stored label checkable.
//
// Planted inconsistencies only ever rewrite tokens inside one span of the
// text; the scene (the "image") is left untouched.

#ifndef CONTEXTGUARD_DATAGEN_HPP_
#define CONTEXTGUARD_DATAGEN_HPP_

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "contextguard/core.hpp"

namespace contextguard {

enum class Attribute : int {
  kPerson = 0,
  kLocation,
  kEvent,
  kSentiment,
  kNarrative,
  kBackground,
  kTime,
  kZone,
  kSetting,  // claimed venue of the event; checked against compatibility
};

inline constexpr int kNumAttributes = 9;

std::string_view to_string(Attribute a);
Attribute parse_attribute(std::string_view name);

// Value of `a` as rendered for this scene (sentiment is bucketed; the
// setting renders the scene's own spatial zone).
int attribute_value(const SceneDescriptor& scene, Attribute a, int n_sentiment_bins);

struct TemplateGrammar {
  std::array<int, kNumAttributes> connectives{};
  // templates[attribute][value] -> token ids
  std::array<std::vector<std::vector<int>>, kNumAttributes> templates;
  // Display word for every token id.
  std::vector<std::string> words;

  int vocab_size() const;
  int value_count(Attribute a) const {
    return static_cast<int>(templates[static_cast<int>(a)].size());
  }
  int span_length(Attribute a) const;

  // Throws ConfigError when templates are not injective, vary in length
  // within an attribute, or token ids collide.
  void validate() const;

  static TemplateGrammar make_default(const VocabConfig& vocab,
                                      int span_length = 3);
};

// Which spatial zones an event can logically take place in.
struct CompatibilityTable {
  int n_event = 0;
  int n_zone = 0;
  std::vector<char> compatible;  // row-major [event][zone]

  bool operator()(int event_id, int zone_id) const;
  std::vector<int> compatible_zones(int event_id) const;
  std::vector<int> incompatible_zones(int event_id) const;
  // Every event must have at least one compatible zone.
  void validate() const;

  static CompatibilityTable make_default(const VocabConfig& vocab);
};

struct SyntheticWorld {
  VocabConfig vocab;
  TemplateGrammar grammar;
  CompatibilityTable compat;

  static SyntheticWorld make_default(const VocabConfig& vocab,
                                     int span_length = 3);
};

struct GenConfig {
  int n_consistent = 1250;
  int n_inconsistent = 1250;
  // Indexed by DatasetProfile.
  std::array<double, 3> profile_mix = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  VocabConfig vocab;
  double difficulty = 1.0;
  double subtle_difficulty = 0.34;
  int span_length = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

// --- generation ------------------------------------------------------------

SceneDescriptor generate_scene(const SyntheticWorld& world, Rng& rng);

std::vector<int> render_text(const SceneDescriptor& scene,
                             const TemplateGrammar& grammar);

// Inverse of render_text: one optional value per attribute, nullopt where a
// span matches no template. All nullopt if the token layout is malformed.
using ParsedText = std::array<std::optional<int>, kNumAttributes>;
ParsedText parse_text(std::span<const int> tokens,
                      const TemplateGrammar& grammar);

// Labels implied by comparing the parsed text with the scene.
struct OracleLabels {
  std::array<bool, kNumEntities> entity{};
  std::array<bool, kNumDimensions> dimension{};
  bool label(Target t) const;
};
OracleLabels oracle_labels(const SceneDescriptor& scene,
                           std::span<const int> tokens,
                           const SyntheticWorld& world);

// Token span [begin, end) of attribute `a` in any well-formed text.
std::pair<int, int> attribute_span(const TemplateGrammar& grammar,
                                   Attribute a);

// Number of span tokens rewritten at this difficulty: round(d * len), at
// least one.
int tokens_to_change(double difficulty, int span_length);

// Applicable targets for which a plant is also feasible in this world.
std::vector<Target> plantable_targets(const PairRecord& record,
                                      const SyntheticWorld& world);

PairRecord make_consistent_record(std::string id, const SceneDescriptor& scene,
                                  DatasetProfile profile,
                                  const SyntheticWorld& world);

// Rewrites the text span of `target` so that exactly that label becomes
// false. Throws std::invalid_argument when the record is not consistent or
// the target is not plantable. The result keeps the source id; callers
// assign a fresh one.
PairRecord plant_inconsistency(const PairRecord& record, Target target,
                               Rng& rng, double difficulty,
                               const SyntheticWorld& world);

Corpus generate_corpus(const GenConfig& config, const SyntheticWorld& world,
                       int workers = 1);

// Hard negative for the robustness protocol: a minimal plant on a consistent
// test record, target uniform over plantable targets.
PairRecord perturb_subtle(const PairRecord& record, Rng& rng,
                          const SyntheticWorld& world,
                          double difficulty = 0.34);

// One subtle perturbation per consistent test record, ids "p000000"...
std::vector<PairRecord> make_perturbed_test_set(const Corpus& corpus,
                                                const SyntheticWorld& world,
                                                std::uint64_t seed,
                                                double difficulty = 0.34);

std::string detokenize(std::span<const int> tokens,
                       const TemplateGrammar& grammar);
std::string scene_summary(const SceneDescriptor& scene);

// --- files -----------------------------------------------------------------

// One line per template: {"attribute":..,"value":..,"tokens":[..],
// "words":[..]}; connectives use attribute "connective" with value = index
// of the attribute they precede.
void save_grammar(const TemplateGrammar& grammar, const std::string& path);
TemplateGrammar load_grammar(const std::string& path);

// One line per (event, zone): {"event_id":..,"spatial_zone_id":..,
// "compatible":..}
void save_compatibility(const CompatibilityTable& table,
                        const std::string& path);
CompatibilityTable load_compatibility(const std::string& path);

}  // namespace contextguard

#endif  // CONTEXTGUARD_DATAGEN_HPP_
