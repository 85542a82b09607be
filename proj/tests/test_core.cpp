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

#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

#include "contextguard/core.hpp"
#include "test_util.hpp"

namespace contextguard {
namespace {

PairRecord consistent_record(DatasetProfile profile) {
  PairRecord r;
  r.id = "r1";
  r.dataset_profile = profile;
  for (auto e : kLabelledEntities) r.entity_labels[index_of(e)] = true;
  for (auto d : default_profile_rules().at(profile)) r.ctxt_labels[index_of(d)] = true;
  r.overall_consistent = true;
  return r;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() /
         ("contextguard_core_" + std::to_string(::getpid()) + "_" + name);
}

TEST(ValidateRecord, FullyConsistentRecordIsValid) {
  for (auto p : kAllProfiles) {
    EXPECT_TRUE(validate_record(consistent_record(p), default_profile_rules()).empty());
  }
}

TEST(ValidateRecord, FalseLabelWithConsistentOverallIsContradiction) {
  PairRecord r = consistent_record(DatasetProfile::kTamperedNewsEnt);
  r.ctxt_labels[index_of(ContextDimension::kSentiment)] = false;
  EXPECT_EQ(validate_record(r, default_profile_rules()),
            ValidationReport{"overall/label contradiction"});
}

TEST(ValidateRecord, MissingRequiredDimension) {
  PairRecord r = consistent_record(DatasetProfile::kMMGEnt);
  r.ctxt_labels[index_of(ContextDimension::kLogicalCoherence)].reset();
  EXPECT_EQ(validate_record(r, default_profile_rules()),
            ValidationReport{"missing required dimension LogicalCoherence"});
}

TEST(ValidateRecord, UnexpectedDimensionAndOrder) {
  PairRecord r = consistent_record(DatasetProfile::kMMGEnt);
  r.ctxt_labels[index_of(ContextDimension::kSentiment)] = true;
  r.scene.time_slot = 30;
  EXPECT_EQ(validate_record(r, default_profile_rules()),
            (ValidationReport{"time_slot outside [0,23]", "unexpected dimension Sentiment"}));
}

// Exhaustive over every label assignment of every profile: the record is
// valid exactly when overall equals the conjunction of present labels.
TEST(ValidateRecord, ConjunctionClosureExhaustive) {
  for (auto p : kAllProfiles) {
    const auto dims = default_profile_rules().at(p);
    const int n = kNumEntities + static_cast<int>(dims.size());
    for (int mask = 0; mask < (1 << n); ++mask) {
      for (bool overall : {false, true}) {
        PairRecord r = consistent_record(p);
        bool all = true;
        for (int i = 0; i < n; ++i) {
          const bool v = (mask >> i) & 1;
          all = all && v;
          if (i < kNumEntities) {
            r.entity_labels[i] = v;
          } else {
            r.ctxt_labels[index_of(dims[i - kNumEntities])] = v;
          }
        }
        r.overall_consistent = overall;
        EXPECT_EQ(r.labels_conjunction(), all);
        EXPECT_EQ(validate_record(r, default_profile_rules()).empty(), overall == all);
      }
    }
  }
}

TEST(CorpusIo, EmptyFileLoadsEmptyCorpus) {
  const auto path = temp_file("empty.jsonl");
  std::ofstream(path).close();
  EXPECT_TRUE(load_corpus(path.string()).records.empty());
  std::filesystem::remove(path);
}

TEST(CorpusIo, RoundTripOfGeneratedCorpus) {
  const auto world = testing::small_world();
  Corpus c = testing::small_corpus(world, 60, 60, 7);
  const auto path = temp_file("rt.jsonl");
  save_corpus(c, path.string());
  Corpus back = load_corpus(path.string(), c.vocab_config);
  back.seed = c.seed;
  EXPECT_EQ(back, c);
  std::filesystem::remove(path);
}

TEST(CorpusIo, DuplicateIdIsNamed) {
  const auto world = testing::small_world();
  Corpus c = testing::small_corpus(world, 3, 0, 1);
  c.records[1].id = c.records[0].id;
  const auto path = temp_file("dup.jsonl");
  save_corpus(c, path.string());
  try {
    load_corpus(path.string());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(c.records[0].id), std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST(CorpusIo, ParseErrorNamesLine) {
  const auto world = testing::small_world();
  Corpus c = testing::small_corpus(world, 2, 0, 1);
  const auto path = temp_file("bad.jsonl");
  {
    std::ofstream out(path);
    out << record_to_json_line(c.records[0]) << "\n{not json\n";
  }
  try {
    load_corpus(path.string());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
}

TEST(CorpusIo, AbsentOptionalFieldsAreOmitted) {
  PairRecord r = consistent_record(DatasetProfile::kMMGEnt);
  const std::string line = record_to_json_line(r);
  EXPECT_EQ(line.find("perturbation"), std::string::npos);
  EXPECT_EQ(line.find("null"), std::string::npos);
  EXPECT_EQ(line.find("Sentiment"), std::string::npos);
}

Corpus plain_corpus(int n) {
  Corpus c;
  for (int i = 0; i < n; ++i) {
    PairRecord r = consistent_record(DatasetProfile::kTamperedNewsEnt);
    r.id = "r" + std::to_string(i);
    c.records.push_back(r);
  }
  return c;
}

std::array<int, 4> split_sizes(const Corpus& c) {
  std::array<int, 4> n{};
  for (const auto& r : c.records) n[static_cast<int>(r.split)]++;
  return n;
}

TEST(SplitCorpus, ExactDivision) {
  const Corpus c = split_corpus(plain_corpus(100), {0.8, 0.1, 0.1}, 1);
  EXPECT_EQ(split_sizes(c), (std::array<int, 4>{80, 10, 10, 0}));
}

TEST(SplitCorpus, RemainderGoesToTrain) {
  const Corpus c = split_corpus(plain_corpus(7), {0.5, 0.25, 0.25}, 3);
  EXPECT_EQ(split_sizes(c), (std::array<int, 4>{5, 1, 1, 0}));
}

TEST(SplitCorpus, DegenerateAllTrain) {
  const Corpus c = split_corpus(plain_corpus(10), {1.0, 0.0, 0.0}, 5);
  EXPECT_EQ(split_sizes(c), (std::array<int, 4>{10, 0, 0, 0}));
}

TEST(SplitCorpus, DeterministicAndPerturbedExcluded) {
  Corpus base = plain_corpus(50);
  base.records[3].split = Split::kPerturbedTest;
  const Corpus a = split_corpus(base, {0.6, 0.2, 0.2}, 9);
  const Corpus b = split_corpus(base, {0.6, 0.2, 0.2}, 9);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.records[3].split, Split::kPerturbedTest);
  EXPECT_EQ(split_sizes(a), (std::array<int, 4>{31, 9, 9, 1}));
  const Corpus other = split_corpus(base, {0.6, 0.2, 0.2}, 10);
  EXPECT_NE(a, other);
}

TEST(SplitCorpus, RejectsBadFractions) {
  EXPECT_THROW(split_corpus(plain_corpus(4), {0.5, 0.5, 0.5}, 1), ConfigError);
  EXPECT_THROW(split_corpus(plain_corpus(4), {1.2, -0.2, 0.0}, 1), ConfigError);
}

TEST(Names, RoundTripAndRejectUnknown) {
  for (auto d : kAllDimensions) EXPECT_EQ(parse_dimension(to_string(d)), d);
  for (int t = 0; t < kNumTargets; ++t) {
    EXPECT_EQ(parse_target(to_string(static_cast<Target>(t))), static_cast<Target>(t));
  }
  for (auto p : kAllProfiles) EXPECT_EQ(parse_profile(to_string(p)), p);
  EXPECT_THROW(parse_dimension("Mood"), DataError);
}

TEST(DeriveSeed, StableAndLabelSensitive) {
  EXPECT_EQ(derive_seed(1, "a", 2), derive_seed(1, "a", 2));
  std::set<std::uint64_t> seen;
  for (std::uint64_t base : {0, 1}) {
    for (const char* label : {"a", "b", "ab"}) {
      for (std::uint64_t i : {0, 1, 2}) seen.insert(derive_seed(base, label, i));
    }
  }
  EXPECT_EQ(seen.size(), 18u);
}

}  // namespace
}  // namespace contextguard
