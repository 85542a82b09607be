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

// Domain types shared by every stage of the pipeline: scene descriptors, the
// image-text pair record with its fine-grained labels, the corpus container,
// record validation, the line-delimited corpus format and deterministic
// splitting.

#ifndef CONTEXTGUARD_CORE_HPP_
#define CONTEXTGUARD_CORE_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace contextguard {

using Rng = std::mt19937_64;

// Error categories. The CLI maps each to its own exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ContextDimension : int {
  kSentiment = 0,
  kNarrative,
  kBackground,
  kTemporalSpatial,
  kLogicalCoherence,
};

inline constexpr int kNumDimensions = 5;
inline constexpr std::array<ContextDimension, kNumDimensions> kAllDimensions = {
    ContextDimension::kSentiment, ContextDimension::kNarrative,
    ContextDimension::kBackground, ContextDimension::kTemporalSpatial,
    ContextDimension::kLogicalCoherence};

enum class EntityType : int { kPER = 0, kLOC, kEVT, kCTXT };

inline constexpr int kNumEntities = 3;  // PER, LOC, EVT carry labels directly.
inline constexpr std::array<EntityType, kNumEntities> kLabelledEntities = {
    EntityType::kPER, EntityType::kLOC, EntityType::kEVT};

// What a planted inconsistency touched: one labelled entity type or one
// context dimension.
enum class Target : int {
  kPER = 0,
  kLOC,
  kEVT,
  kSentiment,
  kNarrative,
  kBackground,
  kTemporalSpatial,
  kLogicalCoherence,
};

inline constexpr int kNumTargets = 8;

enum class Split : int { kTrain = 0, kVal, kTest, kPerturbedTest };

enum class DatasetProfile : int { kTamperedNewsEnt = 0, kNews400Ent, kMMGEnt };

inline constexpr std::array<DatasetProfile, 3> kAllProfiles = {
    DatasetProfile::kTamperedNewsEnt, DatasetProfile::kNews400Ent,
    DatasetProfile::kMMGEnt};

std::string_view to_string(ContextDimension d);
std::string_view to_string(EntityType e);
std::string_view to_string(Target t);
std::string_view to_string(Split s);
std::string_view to_string(DatasetProfile p);

// Parsers throw DataError on unknown names.
ContextDimension parse_dimension(std::string_view name);
EntityType parse_entity(std::string_view name);
Target parse_target(std::string_view name);
Split parse_split(std::string_view name);
DatasetProfile parse_profile(std::string_view name);

inline int index_of(ContextDimension d) { return static_cast<int>(d); }
inline int index_of(EntityType e) { return static_cast<int>(e); }
inline int index_of(Target t) { return static_cast<int>(t); }

Target to_target(ContextDimension d);
Target to_target(EntityType e);
bool is_entity(Target t);
std::optional<ContextDimension> dimension_of(Target t);
std::optional<EntityType> entity_of(Target t);

// Vocabulary sizes of the scene attributes. time_slot always spans [0,24).
struct VocabConfig {
  int n_person = 6;
  int n_location = 6;
  int n_event = 6;
  int n_narrative = 4;
  int n_background = 4;
  int n_zone = 4;
  int n_sentiment_bins = 4;  // must be even so every bin has an antonym

  void validate() const;
  friend bool operator==(const VocabConfig&, const VocabConfig&) = default;
};

inline constexpr int kTimeSlots = 24;

struct SceneDescriptor {
  int person_id = 0;
  int location_id = 0;
  int event_id = 0;
  double sentiment_polarity = 0.0;
  int narrative_theme_id = 0;
  int background_id = 0;
  int time_slot = 0;
  int spatial_zone_id = 0;
  bool coherence_flag = true;

  friend bool operator==(const SceneDescriptor&,
                         const SceneDescriptor&) = default;
};

// Polarity bucket of the scene sentiment; bins partition [-1,1] uniformly.
int sentiment_bin(double polarity, int n_bins);

struct Perturbation {
  std::string source_id;
  Target dimension = Target::kPER;
  std::string method;

  friend bool operator==(const Perturbation&, const Perturbation&) = default;
};

struct PairRecord {
  std::string id;
  Split split = Split::kTrain;
  SceneDescriptor scene;
  std::vector<int> text_tokens;
  // Indexed by EntityType (PER, LOC, EVT); absent means unlabelled.
  std::array<std::optional<bool>, kNumEntities> entity_labels;
  // Indexed by ContextDimension in canonical order.
  std::array<std::optional<bool>, kNumDimensions> ctxt_labels;
  bool overall_consistent = true;
  DatasetProfile dataset_profile = DatasetProfile::kTamperedNewsEnt;
  std::optional<Perturbation> perturbation;

  const std::optional<bool>& label(ContextDimension d) const {
    return ctxt_labels[index_of(d)];
  }
  const std::optional<bool>& label(EntityType e) const {
    return entity_labels[index_of(e)];
  }
  std::optional<bool> label(Target t) const;
  void set_label(Target t, bool value);

  // Conjunction of all present labels.
  bool labels_conjunction() const;
  std::vector<ContextDimension> annotated_dimensions() const;

  friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

// Which context dimensions each dataset profile annotates.
using ProfileRules = std::map<DatasetProfile, std::vector<ContextDimension>>;
const ProfileRules& default_profile_rules();

// Targets a planted inconsistency may use for a record of this profile.
std::vector<Target> applicable_targets(DatasetProfile profile,
                                       const ProfileRules& rules =
                                           default_profile_rules());

struct Corpus {
  std::vector<PairRecord> records;
  VocabConfig vocab_config;
  std::uint64_t seed = 0;

  const PairRecord* find(std::string_view id) const;
  std::vector<const PairRecord*> in_split(Split s) const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

using ValidationReport = std::vector<std::string>;

// Returns every violated record invariant, in a fixed order. Scene ranges are
// only checked when a vocabulary is supplied.
ValidationReport validate_record(const PairRecord& record,
                                 const ProfileRules& profile_rules);
ValidationReport validate_record(const PairRecord& record,
                                 const ProfileRules& profile_rules,
                                 const VocabConfig& vocab);

// Corpus-level checks: id uniqueness and lineage resolvability, plus every
// record's own report. Throws DataError naming the first offending record.
void validate_corpus(const Corpus& corpus,
                     const ProfileRules& rules = default_profile_rules());

std::string scene_to_json_string(const SceneDescriptor& scene);
SceneDescriptor scene_from_json_string(std::string_view text);

// Line-delimited JSON (one PairRecord per line).
std::string record_to_json_line(const PairRecord& record);
PairRecord record_from_json_line(std::string_view line);

void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path, const VocabConfig& vocab = {});

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

Corpus split_corpus(Corpus corpus, const SplitFractions& fractions,
                    std::uint64_t seed);

// Stable 64-bit mixing used to derive independent rng streams from a base
// seed and a label (record id, stream name, index).
std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                          std::uint64_t index = 0);

}  // namespace contextguard

#endif  // CONTEXTGUARD_CORE_HPP_
