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

#include "contextguard/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "contextguard/parallel.hpp"
#include "json.hpp"

namespace contextguard {

namespace {

constexpr std::array<std::string_view, kNumAttributes> kAttributeNames = {
    "person", "location", "event", "sentiment", "narrative",
    "background", "time", "zone", "setting"};
constexpr std::array<std::string_view, kNumAttributes> kWordPrefix = {
    "per", "loc", "evt", "snt", "nar", "bkg", "hr", "zon", "set"};
constexpr std::array<std::string_view, kNumAttributes> kConnectiveWords = {
    "who", "where", "what", "mood", "theme", "backdrop", "when", "zone",
    "setting"};

int attr_index(Attribute a) { return static_cast<int>(a); }

Attribute attribute_for(Target t) {
  switch (t) {
    case Target::kPER: return Attribute::kPerson;
    case Target::kLOC: return Attribute::kLocation;
    case Target::kEVT: return Attribute::kEvent;
    case Target::kSentiment: return Attribute::kSentiment;
    case Target::kNarrative: return Attribute::kNarrative;
    case Target::kBackground: return Attribute::kBackground;
    case Target::kTemporalSpatial: return Attribute::kTime;
    case Target::kLogicalCoherence: return Attribute::kSetting;
  }
  return Attribute::kPerson;
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Uniform over [0, n) without `exclude`.
int other_value(Rng& rng, int n, int exclude) {
  const int r = uniform_int(rng, 0, n - 2);
  return r >= exclude ? r + 1 : r;
}

}  // namespace

std::string_view to_string(Attribute a) { return kAttributeNames[attr_index(a)]; }

Attribute parse_attribute(std::string_view name) {
  for (int i = 0; i < kNumAttributes; ++i) {
    if (kAttributeNames[i] == name) return static_cast<Attribute>(i);
  }
  throw DataError("unknown grammar attribute '" + std::string(name) + "'");
}

int attribute_value(const SceneDescriptor& s, Attribute a, int n_bins) {
  switch (a) {
    case Attribute::kPerson: return s.person_id;
    case Attribute::kLocation: return s.location_id;
    case Attribute::kEvent: return s.event_id;
    case Attribute::kSentiment: return sentiment_bin(s.sentiment_polarity, n_bins);
    case Attribute::kNarrative: return s.narrative_theme_id;
    case Attribute::kBackground: return s.background_id;
    case Attribute::kTime: return s.time_slot;
    case Attribute::kZone: return s.spatial_zone_id;
    case Attribute::kSetting: return s.spatial_zone_id;
  }
  return 0;
}

// --- grammar ---------------------------------------------------------------

int TemplateGrammar::vocab_size() const {
  int mx = -1;
  for (int c : connectives) mx = std::max(mx, c);
  for (const auto& attr : templates) {
    for (const auto& t : attr) {
      for (int tok : t) mx = std::max(mx, tok);
    }
  }
  return std::max<int>(mx + 1, static_cast<int>(words.size()));
}

int TemplateGrammar::span_length(Attribute a) const {
  const auto& t = templates[attr_index(a)];
  return t.empty() ? 0 : static_cast<int>(t.front().size());
}

void TemplateGrammar::validate() const {
  std::set<int> seen_connectives;
  for (int c : connectives) {
    if (c < 0 || !seen_connectives.insert(c).second) {
      throw ConfigError("grammar connective tokens must be distinct and >= 0");
    }
  }
  for (int a = 0; a < kNumAttributes; ++a) {
    const auto& ts = templates[a];
    if (ts.empty()) {
      throw ConfigError("grammar has no templates for attribute " +
                        std::string(kAttributeNames[a]));
    }
    const std::size_t len = ts.front().size();
    std::set<std::vector<int>> distinct;
    for (const auto& t : ts) {
      if (t.size() != len || len == 0) {
        throw ConfigError("grammar templates of " +
                          std::string(kAttributeNames[a]) +
                          " must share one nonzero length");
      }
      for (int tok : t) {
        if (tok < 0 || seen_connectives.count(tok)) {
          throw ConfigError("grammar template token collides with a connective");
        }
      }
      distinct.insert(t);
    }
    if (distinct.size() != ts.size()) {
      throw ConfigError("grammar templates of " +
                        std::string(kAttributeNames[a]) + " are not injective");
    }
  }
}

TemplateGrammar TemplateGrammar::make_default(const VocabConfig& vocab,
                                              int span_length) {
  if (span_length < 1) throw ConfigError("span_length must be >= 1");
  vocab.validate();
  const std::array<int, kNumAttributes> counts = {
      vocab.n_person,     vocab.n_location,  vocab.n_event,
      vocab.n_sentiment_bins, vocab.n_narrative, vocab.n_background,
      kTimeSlots,         vocab.n_zone,      vocab.n_zone};
  TemplateGrammar g;
  int next = 0;
  for (int a = 0; a < kNumAttributes; ++a) {
    g.connectives[a] = next++;
    g.words.emplace_back(kConnectiveWords[a]);
  }
  for (int a = 0; a < kNumAttributes; ++a) {
    g.templates[a].resize(counts[a]);
    for (int v = 0; v < counts[a]; ++v) {
      for (int j = 0; j < span_length; ++j) {
        g.templates[a][v].push_back(next++);
        g.words.push_back(std::string(kWordPrefix[a]) + std::to_string(v) +
                          static_cast<char>('a' + j % 26));
      }
    }
  }
  return g;
}

// --- compatibility -----------------------------------------------------------

bool CompatibilityTable::operator()(int event_id, int zone_id) const {
  if (event_id < 0 || event_id >= n_event || zone_id < 0 || zone_id >= n_zone) {
    return false;
  }
  return compatible[static_cast<std::size_t>(event_id * n_zone + zone_id)] != 0;
}

std::vector<int> CompatibilityTable::compatible_zones(int event_id) const {
  std::vector<int> out;
  for (int z = 0; z < n_zone; ++z) {
    if ((*this)(event_id, z)) out.push_back(z);
  }
  return out;
}

std::vector<int> CompatibilityTable::incompatible_zones(int event_id) const {
  std::vector<int> out;
  for (int z = 0; z < n_zone; ++z) {
    if (!(*this)(event_id, z)) out.push_back(z);
  }
  return out;
}

void CompatibilityTable::validate() const {
  if (n_event < 1 || n_zone < 1 ||
      compatible.size() != static_cast<std::size_t>(n_event * n_zone)) {
    throw ConfigError("compatibility table shape does not match vocabulary");
  }
  for (int e = 0; e < n_event; ++e) {
    if (compatible_zones(e).empty()) {
      throw ConfigError("event " + std::to_string(e) +
                        " has no compatible spatial zone");
    }
  }
}

CompatibilityTable CompatibilityTable::make_default(const VocabConfig& vocab) {
  CompatibilityTable t;
  t.n_event = vocab.n_event;
  t.n_zone = vocab.n_zone;
  t.compatible.resize(static_cast<std::size_t>(t.n_event * t.n_zone));
  for (int e = 0; e < t.n_event; ++e) {
    for (int z = 0; z < t.n_zone; ++z) {
      t.compatible[e * t.n_zone + z] = (2 * e + z) % 3 != 2;
    }
  }
  return t;
}

SyntheticWorld SyntheticWorld::make_default(const VocabConfig& vocab,
                                            int span_length) {
  return SyntheticWorld{vocab, TemplateGrammar::make_default(vocab, span_length),
                        CompatibilityTable::make_default(vocab)};
}

void GenConfig::validate() const {
  if (n_consistent < 0 || n_inconsistent < 0) {
    throw ConfigError("record counts must be >= 0");
  }
  if (n_inconsistent > 0 && n_consistent == 0) {
    throw ConfigError("inconsistent records need consistent sources");
  }
  double sum = 0.0;
  for (double f : profile_mix) {
    if (f < 0) throw ConfigError("profile_mix fractions must be >= 0");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("profile_mix fractions must sum to 1");
  }
  if (!(difficulty > 0.0 && difficulty <= 1.0) ||
      !(subtle_difficulty > 0.0 && subtle_difficulty <= 1.0)) {
    throw ConfigError("difficulty must lie in (0,1]");
  }
  if (span_length < 1) throw ConfigError("span_length must be >= 1");
  vocab.validate();
}

// --- generation --------------------------------------------------------------

SceneDescriptor generate_scene(const SyntheticWorld& world, Rng& rng) {
  const auto& v = world.vocab;
  SceneDescriptor s;
  s.person_id = uniform_int(rng, 0, v.n_person - 1);
  s.location_id = uniform_int(rng, 0, v.n_location - 1);
  s.event_id = uniform_int(rng, 0, v.n_event - 1);
  s.sentiment_polarity = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  s.narrative_theme_id = uniform_int(rng, 0, v.n_narrative - 1);
  s.background_id = uniform_int(rng, 0, v.n_background - 1);
  s.time_slot = uniform_int(rng, 0, kTimeSlots - 1);
  const auto zones = world.compat.compatible_zones(s.event_id);
  if (zones.empty()) {
    throw ConfigError("event has no compatible zone");
  }
  s.spatial_zone_id = zones[uniform_int(rng, 0, static_cast<int>(zones.size()) - 1)];
  s.coherence_flag = true;
  return s;
}

std::vector<int> render_text(const SceneDescriptor& scene,
                             const TemplateGrammar& grammar) {
  const int bins = grammar.value_count(Attribute::kSentiment);
  std::vector<int> out;
  for (int a = 0; a < kNumAttributes; ++a) {
    const int value = attribute_value(scene, static_cast<Attribute>(a), bins);
    const auto& ts = grammar.templates[a];
    if (value < 0 || value >= static_cast<int>(ts.size())) {
      throw DataError("grammar does not cover " +
                      std::string(kAttributeNames[a]) + " value " +
                      std::to_string(value));
    }
    out.push_back(grammar.connectives[a]);
    out.insert(out.end(), ts[value].begin(), ts[value].end());
  }
  return out;
}

std::pair<int, int> attribute_span(const TemplateGrammar& grammar, Attribute a) {
  int pos = 0;
  for (int i = 0; i < kNumAttributes; ++i) {
    pos += 1;  // connective
    const int len = grammar.span_length(static_cast<Attribute>(i));
    if (i == attr_index(a)) return {pos, pos + len};
    pos += len;
  }
  return {pos, pos};
}

ParsedText parse_text(std::span<const int> tokens,
                      const TemplateGrammar& grammar) {
  ParsedText parsed{};
  std::size_t pos = 0;
  for (int a = 0; a < kNumAttributes; ++a) {
    const auto len = static_cast<std::size_t>(
        grammar.span_length(static_cast<Attribute>(a)));
    if (pos + 1 + len > tokens.size() || tokens[pos] != grammar.connectives[a]) {
      return ParsedText{};
    }
    const auto span = tokens.subspan(pos + 1, len);
    const auto& ts = grammar.templates[a];
    for (std::size_t v = 0; v < ts.size(); ++v) {
      if (std::equal(span.begin(), span.end(), ts[v].begin(), ts[v].end())) {
        parsed[a] = static_cast<int>(v);
        break;
      }
    }
    pos += 1 + len;
  }
  if (pos != tokens.size()) return ParsedText{};
  return parsed;
}

bool OracleLabels::label(Target t) const {
  if (auto e = entity_of(t)) return entity[index_of(*e)];
  return dimension[index_of(*dimension_of(t))];
}

OracleLabels oracle_labels(const SceneDescriptor& scene,
                           std::span<const int> tokens,
                           const SyntheticWorld& world) {
  const ParsedText p = parse_text(tokens, world.grammar);
  const int bins = world.grammar.value_count(Attribute::kSentiment);
  auto matches = [&](Attribute a) {
    const auto& v = p[attr_index(a)];
    return v.has_value() && *v == attribute_value(scene, a, bins);
  };
  OracleLabels o;
  o.entity[index_of(EntityType::kPER)] = matches(Attribute::kPerson);
  o.entity[index_of(EntityType::kLOC)] = matches(Attribute::kLocation);
  o.entity[index_of(EntityType::kEVT)] = matches(Attribute::kEvent);
  o.dimension[index_of(ContextDimension::kSentiment)] =
      matches(Attribute::kSentiment);
  o.dimension[index_of(ContextDimension::kNarrative)] =
      matches(Attribute::kNarrative);
  o.dimension[index_of(ContextDimension::kBackground)] =
      matches(Attribute::kBackground);
  o.dimension[index_of(ContextDimension::kTemporalSpatial)] =
      matches(Attribute::kTime) && matches(Attribute::kZone);
  const auto& setting = p[attr_index(Attribute::kSetting)];
  o.dimension[index_of(ContextDimension::kLogicalCoherence)] =
      scene.coherence_flag && setting.has_value() &&
      world.compat(scene.event_id, *setting);
  return o;
}

int tokens_to_change(double difficulty, int span_length) {
  const auto k = static_cast<int>(std::lround(difficulty * span_length));
  return std::clamp(k, 1, span_length);
}

std::vector<Target> plantable_targets(const PairRecord& record,
                                      const SyntheticWorld& world) {
  const auto& g = world.grammar;
  std::vector<Target> out;
  for (Target t : applicable_targets(record.dataset_profile)) {
    bool ok = true;
    switch (t) {
      case Target::kLogicalCoherence:
        ok = !world.compat.incompatible_zones(record.scene.event_id).empty();
        break;
      case Target::kTemporalSpatial:
        ok = g.value_count(Attribute::kTime) >= 2 ||
             g.value_count(Attribute::kZone) >= 2;
        break;
      default:
        ok = g.value_count(attribute_for(t)) >= 2;
    }
    if (ok) out.push_back(t);
  }
  return out;
}

PairRecord make_consistent_record(std::string id, const SceneDescriptor& scene,
                                  DatasetProfile profile,
                                  const SyntheticWorld& world) {
  PairRecord r;
  r.id = std::move(id);
  r.scene = scene;
  r.text_tokens = render_text(scene, world.grammar);
  r.dataset_profile = profile;
  for (auto e : kLabelledEntities) r.entity_labels[index_of(e)] = true;
  for (auto d : default_profile_rules().at(profile)) {
    r.ctxt_labels[index_of(d)] = true;
  }
  r.overall_consistent = true;
  return r;
}

PairRecord plant_inconsistency(const PairRecord& record, Target target,
                               Rng& rng, double difficulty,
                               const SyntheticWorld& world) {
  if (!record.overall_consistent) {
    throw std::invalid_argument("plant_inconsistency needs a consistent record");
  }
  if (!(difficulty > 0.0 && difficulty <= 1.0)) {
    throw std::invalid_argument("difficulty must lie in (0,1]");
  }
  const auto targets = plantable_targets(record, world);
  if (std::find(targets.begin(), targets.end(), target) == targets.end()) {
    throw std::invalid_argument("target " + std::string(to_string(target)) +
                                " not applicable to record " + record.id);
  }
  const auto& g = world.grammar;
  const int bins = g.value_count(Attribute::kSentiment);
  const auto& s = record.scene;

  Attribute attr = attribute_for(target);
  int value = 0;
  switch (target) {
    case Target::kSentiment:
      value = bins - 1 - sentiment_bin(s.sentiment_polarity, bins);
      break;
    case Target::kTemporalSpatial: {
      const bool shift_time =
          g.value_count(Attribute::kZone) < 2 ||
          (g.value_count(Attribute::kTime) >= 2 && uniform_int(rng, 0, 1) == 0);
      if (shift_time) {
        attr = Attribute::kTime;
        const int n = g.value_count(Attribute::kTime);
        value = (s.time_slot + uniform_int(rng, 1, n - 1)) % n;
      } else {
        attr = Attribute::kZone;
        value = other_value(rng, g.value_count(Attribute::kZone),
                            s.spatial_zone_id);
      }
      break;
    }
    case Target::kLogicalCoherence: {
      const auto bad = world.compat.incompatible_zones(s.event_id);
      value = bad[uniform_int(rng, 0, static_cast<int>(bad.size()) - 1)];
      break;
    }
    default:
      value = other_value(rng, g.value_count(attr),
                          attribute_value(s, attr, bins));
  }

  PairRecord out = record;
  const auto [begin, end] = attribute_span(g, attr);
  const auto& replacement = g.templates[attr_index(attr)][value];
  std::vector<int> positions;
  for (int p = begin; p < end; ++p) {
    if (out.text_tokens[p] != replacement[p - begin]) positions.push_back(p);
  }
  std::shuffle(positions.begin(), positions.end(), rng);
  const int k = std::min<int>(tokens_to_change(difficulty, end - begin),
                              static_cast<int>(positions.size()));
  positions.resize(k);
  std::sort(positions.begin(), positions.end());
  for (int p : positions) out.text_tokens[p] = replacement[p - begin];

  out.set_label(target, false);
  out.overall_consistent = false;
  char method[64];
  std::snprintf(method, sizeof(method), "plant:%s:d=%.2f",
                std::string(to_string(attr)).c_str(), difficulty);
  out.perturbation = Perturbation{record.id, target, method};
  return out;
}

Corpus generate_corpus(const GenConfig& config, const SyntheticWorld& world,
                       int workers) {
  config.validate();
  world.grammar.validate();
  world.compat.validate();

  // Largest-remainder apportionment of profiles, then a seeded shuffle.
  std::vector<DatasetProfile> profiles;
  {
    std::array<int, 3> counts{};
    std::array<double, 3> rem{};
    int assigned = 0;
    for (int p = 0; p < 3; ++p) {
      const double exact = config.profile_mix[p] * config.n_consistent;
      counts[p] = static_cast<int>(std::floor(exact + 1e-9));
      rem[p] = exact - counts[p];
      assigned += counts[p];
    }
    std::array<int, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return rem[a] > rem[b]; });
    for (int i = 0; assigned < config.n_consistent; ++i, ++assigned) {
      ++counts[order[i % 3]];
    }
    for (int p = 0; p < 3; ++p) {
      profiles.insert(profiles.end(), counts[p], static_cast<DatasetProfile>(p));
    }
    Rng rng(derive_seed(config.seed, "profiles"));
    std::shuffle(profiles.begin(), profiles.end(), rng);
  }

  Corpus corpus;
  corpus.vocab_config = config.vocab;
  corpus.seed = config.seed;
  corpus.records.resize(
      static_cast<std::size_t>(config.n_consistent + config.n_inconsistent));

  parallel_for(config.n_consistent, workers, [&](std::size_t i) {
    Rng rng(derive_seed(config.seed, "scene", i));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "c%06zu", i);
    corpus.records[i] = make_consistent_record(
        buf, generate_scene(world, rng), profiles[i], world);
  });
  parallel_for(config.n_inconsistent, workers, [&](std::size_t j) {
    Rng rng(derive_seed(config.seed, "plant", j));
    const auto& source = corpus.records[static_cast<std::size_t>(
        uniform_int(rng, 0, config.n_consistent - 1))];
    const auto targets = plantable_targets(source, world);
    const Target t =
        targets[uniform_int(rng, 0, static_cast<int>(targets.size()) - 1)];
    PairRecord r = plant_inconsistency(source, t, rng, config.difficulty, world);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "i%06zu", j);
    r.id = buf;
    corpus.records[config.n_consistent + j] = std::move(r);
  });
  return corpus;
}

PairRecord perturb_subtle(const PairRecord& record, Rng& rng,
                          const SyntheticWorld& world, double difficulty) {
  if (record.split != Split::kTest) {
    throw std::invalid_argument("perturb_subtle needs a test-split record");
  }
  const auto targets = plantable_targets(record, world);
  if (targets.empty()) {
    throw std::invalid_argument("record has nothing to perturb");
  }
  const Target t =
      targets[uniform_int(rng, 0, static_cast<int>(targets.size()) - 1)];
  PairRecord out = plant_inconsistency(record, t, rng, difficulty, world);
  out.split = Split::kPerturbedTest;
  out.perturbation->method = "subtle:" + out.perturbation->method;
  return out;
}

std::vector<PairRecord> make_perturbed_test_set(const Corpus& corpus,
                                                const SyntheticWorld& world,
                                                std::uint64_t seed,
                                                double difficulty) {
  std::vector<PairRecord> out;
  for (const auto& r : corpus.records) {
    if (r.split != Split::kTest || !r.overall_consistent) continue;
    Rng rng(derive_seed(seed, r.id));
    PairRecord p = perturb_subtle(r, rng, world, difficulty);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "p%06zu", out.size());
    p.id = buf;
    out.push_back(std::move(p));
  }
  return out;
}

std::string detokenize(std::span<const int> tokens,
                       const TemplateGrammar& grammar) {
  std::string out;
  for (int tok : tokens) {
    if (!out.empty()) out += ' ';
    if (tok >= 0 && tok < static_cast<int>(grammar.words.size())) {
      out += grammar.words[tok];
    } else {
      out += "<" + std::to_string(tok) + ">";
    }
  }
  return out;
}

std::string scene_summary(const SceneDescriptor& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "person=%d location=%d event=%d sentiment=%+.2f narrative=%d "
                "background=%d time=%02d:00 zone=%d coherent=%s",
                s.person_id, s.location_id, s.event_id, s.sentiment_polarity,
                s.narrative_theme_id, s.background_id, s.time_slot,
                s.spatial_zone_id, s.coherence_flag ? "yes" : "no");
  return buf;
}

// --- files -------------------------------------------------------------------

void save_grammar(const TemplateGrammar& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write grammar " + path);
  auto words_of = [&](const std::vector<int>& toks) {
    std::vector<std::string> w;
    for (int t : toks) {
      w.push_back(t < static_cast<int>(g.words.size()) ? g.words[t] : "");
    }
    return w;
  };
  for (int a = 0; a < kNumAttributes; ++a) {
    nlohmann::ordered_json j;
    j["attribute"] = "connective";
    j["value"] = a;
    j["tokens"] = std::vector<int>{g.connectives[a]};
    j["words"] = words_of({g.connectives[a]});
    out << j.dump() << '\n';
  }
  for (int a = 0; a < kNumAttributes; ++a) {
    for (std::size_t v = 0; v < g.templates[a].size(); ++v) {
      nlohmann::ordered_json j;
      j["attribute"] = kAttributeNames[a];
      j["value"] = v;
      j["tokens"] = g.templates[a][v];
      j["words"] = words_of(g.templates[a][v]);
      out << j.dump() << '\n';
    }
  }
}

TemplateGrammar load_grammar(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open grammar " + path);
  TemplateGrammar g;
  std::map<int, std::string> words;
  std::array<std::map<int, std::vector<int>>, kNumAttributes> templates;
  std::array<bool, kNumAttributes> have_connective{};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto attr = j.at("attribute").get<std::string>();
      const int value = j.at("value").get<int>();
      const auto toks = j.at("tokens").get<std::vector<int>>();
      if (j.contains("words")) {
        const auto w = j.at("words").get<std::vector<std::string>>();
        for (std::size_t i = 0; i < w.size() && i < toks.size(); ++i) {
          words[toks[i]] = w[i];
        }
      }
      if (attr == "connective") {
        if (value < 0 || value >= kNumAttributes || toks.size() != 1) {
          throw DataError("bad connective entry");
        }
        g.connectives[value] = toks[0];
        have_connective[value] = true;
      } else {
        templates[attr_index(parse_attribute(attr))][value] = toks;
      }
    } catch (const std::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (int a = 0; a < kNumAttributes; ++a) {
    if (!have_connective[a]) {
      throw DataError("grammar missing connective for " +
                      std::string(kAttributeNames[a]));
    }
    int expect = 0;
    for (auto& [v, toks] : templates[a]) {
      if (v != expect++) {
        throw DataError("grammar values of " + std::string(kAttributeNames[a]) +
                        " are not contiguous from 0");
      }
      g.templates[a].push_back(toks);
    }
  }
  const int vocab = g.vocab_size();
  g.words.resize(vocab);
  for (int t = 0; t < vocab; ++t) {
    auto it = words.find(t);
    g.words[t] = it != words.end() ? it->second : "t" + std::to_string(t);
  }
  g.validate();
  return g;
}

void save_compatibility(const CompatibilityTable& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write compatibility table " + path);
  for (int e = 0; e < t.n_event; ++e) {
    for (int z = 0; z < t.n_zone; ++z) {
      nlohmann::ordered_json j;
      j["event_id"] = e;
      j["spatial_zone_id"] = z;
      j["compatible"] = t(e, z);
      out << j.dump() << '\n';
    }
  }
}

CompatibilityTable load_compatibility(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open compatibility table " + path);
  std::vector<std::tuple<int, int, bool>> rows;
  std::string line;
  std::size_t line_no = 0;
  int max_e = -1, max_z = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const int e = j.at("event_id").get<int>();
      const int z = j.at("spatial_zone_id").get<int>();
      if (e < 0 || z < 0) throw DataError("negative id");
      rows.emplace_back(e, z, j.at("compatible").get<bool>());
      max_e = std::max(max_e, e);
      max_z = std::max(max_z, z);
    } catch (const std::exception& ex) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  CompatibilityTable t;
  t.n_event = max_e + 1;
  t.n_zone = max_z + 1;
  t.compatible.assign(static_cast<std::size_t>(t.n_event * t.n_zone), 0);
  for (auto [e, z, c] : rows) t.compatible[e * t.n_zone + z] = c;
  t.validate();
  return t;
}

}  // namespace contextguard
