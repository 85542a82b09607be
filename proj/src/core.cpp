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

#include "contextguard/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace contextguard {

namespace {

constexpr std::array<std::string_view, kNumDimensions> kDimensionNames = {
    "Sentiment", "Narrative", "Background", "TemporalSpatial",
    "LogicalCoherence"};
constexpr std::array<std::string_view, 4> kEntityNames = {"PER", "LOC", "EVT",
                                                          "CTXT"};
constexpr std::array<std::string_view, 4> kSplitNames = {
    "train", "val", "test", "perturbed_test"};
constexpr std::array<std::string_view, 3> kProfileNames = {
    "TamperedNewsEnt", "News400Ent", "MMGEnt"};

template <class Enum, std::size_t N>
Enum parse_named(const std::array<std::string_view, N>& names,
                 std::string_view name, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == name) return static_cast<Enum>(i);
  }
  throw DataError(std::string("unknown ") + what + " '" + std::string(name) +
                  "'");
}

}  // namespace

std::string_view to_string(ContextDimension d) {
  return kDimensionNames[index_of(d)];
}
std::string_view to_string(EntityType e) { return kEntityNames[index_of(e)]; }
std::string_view to_string(Split s) {
  return kSplitNames[static_cast<int>(s)];
}
std::string_view to_string(DatasetProfile p) {
  return kProfileNames[static_cast<int>(p)];
}
std::string_view to_string(Target t) {
  if (auto e = entity_of(t)) return to_string(*e);
  return to_string(*dimension_of(t));
}

ContextDimension parse_dimension(std::string_view name) {
  return parse_named<ContextDimension>(kDimensionNames, name, "dimension");
}
EntityType parse_entity(std::string_view name) {
  return parse_named<EntityType>(kEntityNames, name, "entity type");
}
Split parse_split(std::string_view name) {
  return parse_named<Split>(kSplitNames, name, "split");
}
DatasetProfile parse_profile(std::string_view name) {
  return parse_named<DatasetProfile>(kProfileNames, name, "dataset profile");
}
Target parse_target(std::string_view name) {
  for (int i = 0; i < kNumTargets; ++i) {
    auto t = static_cast<Target>(i);
    if (to_string(t) == name) return t;
  }
  throw DataError("unknown perturbation target '" + std::string(name) + "'");
}

Target to_target(ContextDimension d) {
  return static_cast<Target>(kNumEntities + index_of(d));
}
Target to_target(EntityType e) {
  if (e == EntityType::kCTXT) {
    throw std::invalid_argument("CTXT is an aggregate, not a target");
  }
  return static_cast<Target>(index_of(e));
}
bool is_entity(Target t) { return index_of(t) < kNumEntities; }
std::optional<ContextDimension> dimension_of(Target t) {
  if (is_entity(t)) return std::nullopt;
  return static_cast<ContextDimension>(index_of(t) - kNumEntities);
}
std::optional<EntityType> entity_of(Target t) {
  if (!is_entity(t)) return std::nullopt;
  return static_cast<EntityType>(index_of(t));
}

void VocabConfig::validate() const {
  for (int n : {n_person, n_location, n_event, n_narrative, n_background,
                n_zone, n_sentiment_bins}) {
    if (n < 1) throw ConfigError("vocabulary sizes must be >= 1");
  }
  if (n_sentiment_bins % 2 != 0) {
    throw ConfigError("n_sentiment_bins must be even");
  }
}

int sentiment_bin(double polarity, int n_bins) {
  const double u = (std::clamp(polarity, -1.0, 1.0) + 1.0) / 2.0;
  return std::min(n_bins - 1, static_cast<int>(std::floor(u * n_bins)));
}

std::optional<bool> PairRecord::label(Target t) const {
  if (auto e = entity_of(t)) return label(*e);
  return label(*dimension_of(t));
}

void PairRecord::set_label(Target t, bool value) {
  if (auto e = entity_of(t)) {
    entity_labels[index_of(*e)] = value;
  } else {
    ctxt_labels[index_of(*dimension_of(t))] = value;
  }
}

bool PairRecord::labels_conjunction() const {
  for (const auto& l : entity_labels) {
    if (l && !*l) return false;
  }
  for (const auto& l : ctxt_labels) {
    if (l && !*l) return false;
  }
  return true;
}

std::vector<ContextDimension> PairRecord::annotated_dimensions() const {
  std::vector<ContextDimension> out;
  for (auto d : kAllDimensions) {
    if (label(d)) out.push_back(d);
  }
  return out;
}

const ProfileRules& default_profile_rules() {
  static const ProfileRules rules = {
      {DatasetProfile::kTamperedNewsEnt,
       {ContextDimension::kSentiment, ContextDimension::kNarrative}},
      {DatasetProfile::kNews400Ent,
       {ContextDimension::kBackground, ContextDimension::kTemporalSpatial}},
      {DatasetProfile::kMMGEnt, {ContextDimension::kLogicalCoherence}},
  };
  return rules;
}

std::vector<Target> applicable_targets(DatasetProfile profile,
                                       const ProfileRules& rules) {
  std::vector<Target> out = {Target::kPER, Target::kLOC, Target::kEVT};
  auto it = rules.find(profile);
  if (it != rules.end()) {
    for (auto d : kAllDimensions) {
      if (std::find(it->second.begin(), it->second.end(), d) !=
          it->second.end()) {
        out.push_back(to_target(d));
      }
    }
  }
  return out;
}

const PairRecord* Corpus::find(std::string_view id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::vector<const PairRecord*> Corpus::in_split(Split s) const {
  std::vector<const PairRecord*> out;
  for (const auto& r : records) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

ValidationReport validate_record(const PairRecord& record,
                                 const ProfileRules& profile_rules) {
  ValidationReport out;
  if (record.id.empty()) out.emplace_back("empty id");
  const auto& s = record.scene;
  if (!std::isfinite(s.sentiment_polarity) || s.sentiment_polarity < -1.0 ||
      s.sentiment_polarity > 1.0) {
    out.emplace_back("sentiment_polarity outside [-1,1]");
  }
  if (s.time_slot < 0 || s.time_slot >= kTimeSlots) {
    out.emplace_back("time_slot outside [0,23]");
  }
  for (auto e : kLabelledEntities) {
    if (!record.label(e)) {
      out.push_back("missing entity label " + std::string(to_string(e)));
    }
  }
  const auto it = profile_rules.find(record.dataset_profile);
  const std::vector<ContextDimension> required =
      it == profile_rules.end() ? std::vector<ContextDimension>{} : it->second;
  for (auto d : kAllDimensions) {
    const bool need =
        std::find(required.begin(), required.end(), d) != required.end();
    if (need && !record.label(d)) {
      out.push_back("missing required dimension " +
                    std::string(to_string(d)));
    } else if (!need && record.label(d)) {
      out.push_back("unexpected dimension " + std::string(to_string(d)));
    }
  }
  if (record.overall_consistent != record.labels_conjunction()) {
    out.emplace_back("overall/label contradiction");
  }
  if (record.perturbation && record.perturbation->source_id == record.id) {
    out.emplace_back("perturbation references itself");
  }
  return out;
}

ValidationReport validate_record(const PairRecord& record,
                                 const ProfileRules& profile_rules,
                                 const VocabConfig& vocab) {
  ValidationReport out;
  const auto& s = record.scene;
  auto check = [&](int value, int size, const char* name) {
    if (value < 0 || value >= size) {
      out.push_back(std::string(name) + " outside vocabulary");
    }
  };
  check(s.person_id, vocab.n_person, "person_id");
  check(s.location_id, vocab.n_location, "location_id");
  check(s.event_id, vocab.n_event, "event_id");
  check(s.narrative_theme_id, vocab.n_narrative, "narrative_theme_id");
  check(s.background_id, vocab.n_background, "background_id");
  check(s.spatial_zone_id, vocab.n_zone, "spatial_zone_id");
  auto rest = validate_record(record, profile_rules);
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

void validate_corpus(const Corpus& corpus, const ProfileRules& rules) {
  std::unordered_set<std::string> ids;
  for (const auto& r : corpus.records) {
    if (!ids.insert(r.id).second) {
      throw DataError("duplicate record id '" + r.id + "'");
    }
  }
  for (const auto& r : corpus.records) {
    auto report = validate_record(r, rules, corpus.vocab_config);
    if (r.perturbation && !ids.count(r.perturbation->source_id)) {
      report.push_back("unresolvable perturbation source '" +
                       r.perturbation->source_id + "'");
    }
    if (!report.empty()) {
      std::string msg = "record '" + r.id + "' invalid:";
      for (const auto& v : report) msg += " [" + v + "]";
      throw DataError(msg);
    }
  }
}

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

ordered_json scene_to_json(const SceneDescriptor& s) {
  ordered_json j;
  j["person_id"] = s.person_id;
  j["location_id"] = s.location_id;
  j["event_id"] = s.event_id;
  j["sentiment_polarity"] = s.sentiment_polarity;
  j["narrative_theme_id"] = s.narrative_theme_id;
  j["background_id"] = s.background_id;
  j["time_slot"] = s.time_slot;
  j["spatial_zone_id"] = s.spatial_zone_id;
  j["coherence_flag"] = s.coherence_flag;
  return j;
}

SceneDescriptor scene_from_json(const json& j) {
  SceneDescriptor s;
  s.person_id = j.at("person_id").get<int>();
  s.location_id = j.at("location_id").get<int>();
  s.event_id = j.at("event_id").get<int>();
  s.sentiment_polarity = j.at("sentiment_polarity").get<double>();
  s.narrative_theme_id = j.at("narrative_theme_id").get<int>();
  s.background_id = j.at("background_id").get<int>();
  s.time_slot = j.at("time_slot").get<int>();
  s.spatial_zone_id = j.at("spatial_zone_id").get<int>();
  s.coherence_flag = j.at("coherence_flag").get<bool>();
  return s;
}

}  // namespace

std::string scene_to_json_string(const SceneDescriptor& scene) {
  return scene_to_json(scene).dump();
}

SceneDescriptor scene_from_json_string(std::string_view text) {
  return scene_from_json(json::parse(text));
}

std::string record_to_json_line(const PairRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["split"] = to_string(r.split);
  j["scene"] = scene_to_json(r.scene);
  j["text_tokens"] = r.text_tokens;
  ordered_json entities = ordered_json::object();
  for (auto e : kLabelledEntities) {
    if (r.label(e)) entities[std::string(to_string(e))] = *r.label(e);
  }
  j["entity_labels"] = entities;
  ordered_json ctxt = ordered_json::object();
  for (auto d : kAllDimensions) {
    if (r.label(d)) ctxt[std::string(to_string(d))] = *r.label(d);
  }
  j["ctxt_labels"] = ctxt;
  j["overall_consistent"] = r.overall_consistent;
  j["dataset_profile"] = to_string(r.dataset_profile);
  if (r.perturbation) {
    ordered_json p;
    p["source_id"] = r.perturbation->source_id;
    p["dimension"] = to_string(r.perturbation->dimension);
    p["method"] = r.perturbation->method;
    j["perturbation"] = p;
  }
  return j.dump();
}

PairRecord record_from_json_line(std::string_view line) {
  const json j = json::parse(line);
  PairRecord r;
  r.id = j.at("id").get<std::string>();
  r.split = parse_split(j.at("split").get<std::string>());
  r.scene = scene_from_json(j.at("scene"));
  r.text_tokens = j.at("text_tokens").get<std::vector<int>>();
  for (const auto& [key, value] : j.at("entity_labels").items()) {
    const auto e = parse_entity(key);
    if (e == EntityType::kCTXT) {
      throw DataError("CTXT is not a direct entity label");
    }
    r.entity_labels[index_of(e)] = value.get<bool>();
  }
  for (const auto& [key, value] : j.at("ctxt_labels").items()) {
    r.ctxt_labels[index_of(parse_dimension(key))] = value.get<bool>();
  }
  r.overall_consistent = j.at("overall_consistent").get<bool>();
  r.dataset_profile = parse_profile(j.at("dataset_profile").get<std::string>());
  if (j.contains("perturbation")) {
    const auto& p = j.at("perturbation");
    r.perturbation = Perturbation{p.at("source_id").get<std::string>(),
                                  parse_target(p.at("dimension").get<std::string>()),
                                  p.at("method").get<std::string>()};
  }
  return r;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file " + path);
  for (const auto& r : corpus.records) out << record_to_json_line(r) << '\n';
  if (!out) throw DataError("failed writing corpus file " + path);
}

Corpus load_corpus(const std::string& path, const VocabConfig& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file " + path);
  Corpus corpus;
  corpus.vocab_config = vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      corpus.records.push_back(record_from_json_line(line));
    } catch (const std::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": parse error: " + e.what());
    }
  }
  validate_corpus(corpus);
  return corpus;
}

Corpus split_corpus(Corpus corpus, const SplitFractions& f,
                    std::uint64_t seed) {
  if (f.train < 0 || f.val < 0 || f.test < 0 ||
      std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be nonnegative and sum to 1");
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    if (corpus.records[i].split != Split::kPerturbedTest) idx.push_back(i);
  }
  Rng rng(derive_seed(seed, "split"));
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n = static_cast<double>(idx.size());
  const auto n_val = static_cast<std::size_t>(std::floor(f.val * n + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(f.test * n + 1e-9));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    Split s = Split::kTrain;
    if (k < n_val) {
      s = Split::kVal;
    } else if (k < n_val + n_test) {
      s = Split::kTest;
    }
    corpus.records[idx[k]].split = s;
  }
  return corpus;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                          std::uint64_t index) {
  // FNV-1a over the label, then splitmix64 finalisation.
  std::uint64_t h = 1469598103934665603ULL ^ base;
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  h ^= index + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
  h += 0x9E3779B97F4A7C15ULL;
  h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ULL;
  h = (h ^ (h >> 27)) * 0x94D049BB133111EBULL;
  return h ^ (h >> 31);
}

}  // namespace contextguard
