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

// Run configuration: every setting a command needs, addressable by a dotted
// key. Config files are line-based "key = value" with '#' comments; later
// lines win, and command-line overrides are applied after the file. The key
// "preset" applies a named preset at that point.

#ifndef CONTEXTGUARD_CONFIG_HPP_
#define CONTEXTGUARD_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "contextguard/annotation.hpp"
#include "contextguard/training.hpp"

namespace contextguard {

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  std::size_t n_pairs = kDefaultChallengingPairs;
  int required_judgments = kDefaultRequiredJudgments;
  std::vector<std::string> annotators = {"a1", "a2", "a3", "a4", "a5"};
};

struct RunConfig {
  GenConfig gen;
  SplitFractions split{0.8, 0.0, 0.2};
  TrainConfig train;
  double threshold = 0.5;
  // Seeds seed .. seed + n_seeds - 1 for the multi-seed commands.
  int n_seeds = 5;
  int workers = 1;
  std::uint64_t seed = 0;
  // Inputs; empty means "generate" / "train".
  std::string corpus_path;
  std::string checkpoint_path;
  ServeConfig serve;

  // Throws ConfigError.
  void validate() const;
};

// Desk-scale defaults (the "desk" preset).
RunConfig default_run_config();

// "desk", or "full-scale" (768-wide encoders and context space with the
// reference optimizer settings). Throws ConfigError for other names.
void apply_preset(RunConfig& config, const std::string& name);

// Throws ConfigError on an unknown key or a malformed value.
void set_value(RunConfig& config, const std::string& key,
               const std::string& value);

// Applies "key = value" lines in order. Errors name the line number.
void apply_config_text(RunConfig& config, const std::string& text,
                       const std::string& origin = "<config>");
void apply_config_file(RunConfig& config, const std::string& path);

// Every key with its resolved value, one "key = value" line each, in a fixed
// order. Feeding the result to apply_config_text reproduces the config.
std::string dump_config(const RunConfig& config);

}  // namespace contextguard

#endif  // CONTEXTGUARD_CONFIG_HPP_
