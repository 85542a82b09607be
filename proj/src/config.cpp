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


#include "contextguard/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace contextguard {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
std::string fmt(bool v) { return v ? "true" : "false"; }
template <class T>
std::string fmt(T v) requires std::is_integral_v<T> { return std::to_string(v); }

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto r = std::from_chars(value.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end || value.empty()) {
    throw ConfigError("invalid value '" + value + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("invalid boolean '" + value + "' for " + key);
}

struct Entry {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class T, class Access>
Entry field(std::string key, Access access) {
  Entry e;
  e.key = key;
  e.get = [access](const RunConfig& c) {
    return fmt(access(const_cast<RunConfig&>(c)));
  };
  e.set = [access, key](RunConfig& c, const std::string& v) {
    if constexpr (std::is_same_v<T, bool>) {
      access(c) = parse_bool(key, v);
    } else {
      access(c) = parse_number<T>(key, v);
    }
  };
  return e;
}

Entry text_field(std::string key, std::function<std::string&(RunConfig&)> access) {
  return {key,
          [access](const RunConfig& c) { return access(const_cast<RunConfig&>(c)); },
          [access](RunConfig& c, const std::string& v) { access(c) = v; }};
}

#define CG_FIELD(T, key, member) \
  field<T>(key, [](RunConfig& c) -> T& { return c.member; })

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> e;
    e.push_back({"seed", [](const RunConfig& c) { return fmt(c.seed); },
                 [](RunConfig& c, const std::string& v) {
                   c.seed = parse_number<std::uint64_t>("seed", v);
                 }});
    e.push_back(CG_FIELD(int, "workers", workers));
    e.push_back(CG_FIELD(int, "n_seeds", n_seeds));
    e.push_back(CG_FIELD(double, "threshold", threshold));
    e.push_back(text_field("paths.corpus", [](RunConfig& c) -> std::string& {
      return c.corpus_path;
    }));
    e.push_back(text_field("paths.checkpoint", [](RunConfig& c) -> std::string& {
      return c.checkpoint_path;
    }));

    e.push_back(CG_FIELD(int, "gen.n_consistent", gen.n_consistent));
    e.push_back(CG_FIELD(int, "gen.n_inconsistent", gen.n_inconsistent));
    e.push_back({"gen.profile_mix",
                 [](const RunConfig& c) {
                   std::vector<std::string> parts;
                   for (double f : c.gen.profile_mix) parts.push_back(fmt(f));
                   return join(parts);
                 },
                 [](RunConfig& c, const std::string& v) {
                   const auto parts = split_list(v);
                   if (parts.size() != c.gen.profile_mix.size()) {
                     throw ConfigError("gen.profile_mix needs 3 comma-separated fractions");
                   }
                   for (std::size_t i = 0; i < parts.size(); ++i) {
                     c.gen.profile_mix[i] =
                         parse_number<double>("gen.profile_mix", parts[i]);
                   }
                 }});
    e.push_back(CG_FIELD(double, "gen.difficulty", gen.difficulty));
    e.push_back(CG_FIELD(double, "gen.subtle_difficulty", gen.subtle_difficulty));
    e.push_back(CG_FIELD(int, "gen.span_length", gen.span_length));
    e.push_back(CG_FIELD(int, "vocab.n_person", gen.vocab.n_person));
    e.push_back(CG_FIELD(int, "vocab.n_location", gen.vocab.n_location));
    e.push_back(CG_FIELD(int, "vocab.n_event", gen.vocab.n_event));
    e.push_back(CG_FIELD(int, "vocab.n_narrative", gen.vocab.n_narrative));
    e.push_back(CG_FIELD(int, "vocab.n_background", gen.vocab.n_background));
    e.push_back(CG_FIELD(int, "vocab.n_zone", gen.vocab.n_zone));
    e.push_back(CG_FIELD(int, "vocab.n_sentiment_bins", gen.vocab.n_sentiment_bins));
    e.push_back(CG_FIELD(double, "split.train", split.train));
    e.push_back(CG_FIELD(double, "split.val", split.val));
    e.push_back(CG_FIELD(double, "split.test", split.test));

    e.push_back(CG_FIELD(int, "encoder.d_v", train.model.encoder.d_v));
    e.push_back(CG_FIELD(int, "encoder.d_t", train.model.encoder.d_t));
    e.push_back(CG_FIELD(int, "encoder.d_cm", train.model.encoder.d_cm));
    e.push_back(CG_FIELD(int, "encoder.vocab_size", train.model.encoder.vocab_size));
    e.push_back(CG_FIELD(double, "encoder.noise_std", train.model.encoder.noise_std));
    e.push_back(CG_FIELD(int, "fccr.d_c", train.model.fccr.d_c));
    e.push_back(CG_FIELD(int, "fccr.d_f", train.model.fccr.d_f));
    e.push_back(CG_FIELD(int, "fccr.n_heads", train.model.fccr.n_heads));
    e.push_back(CG_FIELD(int, "fccr.hidden", train.model.fccr.hidden));
    e.push_back(CG_FIELD(bool, "model.no_fccr", train.model.no_fccr));

    e.push_back({"train.paradigm",
                 [](const RunConfig& c) { return std::string(to_string(c.train.paradigm)); },
                 [](RunConfig& c, const std::string& v) {
                   c.train.paradigm = parse_paradigm(v);
                 }});
    e.push_back(CG_FIELD(bool, "train.freeze_backbone", train.freeze_backbone));
    e.push_back(CG_FIELD(double, "train.dim_weight", train.dim_weight));
    e.push_back(CG_FIELD(double, "optimizer.lr", train.optimizer.lr));
    e.push_back(CG_FIELD(double, "optimizer.beta1", train.optimizer.beta1));
    e.push_back(CG_FIELD(double, "optimizer.beta2", train.optimizer.beta2));
    e.push_back(CG_FIELD(double, "optimizer.eps", train.optimizer.eps));
    e.push_back(CG_FIELD(int, "optimizer.batch_size", train.optimizer.batch_size));
    e.push_back(CG_FIELD(int, "optimizer.epochs", train.optimizer.epochs));
    e.push_back(CG_FIELD(double, "optimizer.warmup_fraction",
                         train.optimizer.warmup_fraction));

    e.push_back(CG_FIELD(double, "reward.lambda0", train.reward.lambda0));
    for (int k = 0; k < kNumDimensions; ++k) {
      e.push_back(field<double>(
          "reward.lambda." + std::string(to_string(kAllDimensions[k])),
          [k](RunConfig& c) -> double& { return c.train.reward.lambda_k[k]; }));
    }
    e.push_back(CG_FIELD(double, "reward.baseline_decay", train.baseline_decay));
    e.push_back(CG_FIELD(double, "adversarial.aux_weight", train.adversarial.aux_weight));
    e.push_back(CG_FIELD(double, "adversarial.generator_step",
                         train.adversarial.generator_step));
    e.push_back(CG_FIELD(bool, "adversarial.include_natural_fakes",
                         train.adversarial.include_natural_fakes));
    e.push_back(CG_FIELD(double, "generator.temperature", train.generator.temperature));
    e.push_back(CG_FIELD(bool, "generator.trainable", train.generator.trainable));
    e.push_back(CG_FIELD(double, "generator.floor", train.generator.floor));

    e.push_back(text_field("serve.host", [](RunConfig& c) -> std::string& {
      return c.serve.host;
    }));
    e.push_back(CG_FIELD(int, "serve.port", serve.port));
    e.push_back(text_field("serve.static_dir", [](RunConfig& c) -> std::string& {
      return c.serve.static_dir;
    }));
    e.push_back(CG_FIELD(std::size_t, "serve.n_pairs", serve.n_pairs));
    e.push_back(CG_FIELD(int, "serve.required_judgments", serve.required_judgments));
    e.push_back({"serve.annotators",
                 [](const RunConfig& c) { return join(c.serve.annotators); },
                 [](RunConfig& c, const std::string& v) {
                   c.serve.annotators = split_list(v);
                 }});
    return e;
  }();
  return entries;
}

#undef CG_FIELD

constexpr std::string_view kWeightPrefix = "generator.weight.";

}  // namespace

void RunConfig::validate() const {
  gen.validate();
  if (!(split.train >= 0 && split.val >= 0 && split.test >= 0) ||
      std::abs(split.train + split.val + split.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be >= 0 and sum to 1");
  }
  TrainConfig resolved = train;
  resolved.model = resolve_model_config(
      train.model, SyntheticWorld::make_default(gen.vocab, gen.span_length));
  resolved.validate();
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("threshold must lie in (0,1)");
  }
  if (n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (serve.port < 0 || serve.port > 65535) throw ConfigError("serve.port out of range");
  if (serve.required_judgments < 1) {
    throw ConfigError("serve.required_judgments must be >= 1");
  }
  if (serve.annotators.empty()) throw ConfigError("serve.annotators is empty");
}

RunConfig default_run_config() {
  RunConfig c;
  apply_preset(c, "desk");
  return c;
}

void apply_preset(RunConfig& c, const std::string& name) {
  if (name == "desk") {
    c.train.model.encoder.d_v = 16;
    c.train.model.encoder.d_t = 16;
    c.train.model.encoder.d_cm = 32;
    c.train.model.encoder.noise_std = 0.0;
    c.train.model.fccr.d_c = 16;
    c.train.model.fccr.d_f = 32;
    c.train.model.fccr.hidden = 32;
    c.train.model.fccr.n_heads = 2;
    c.train.optimizer.lr = 3e-3;
    c.train.optimizer.batch_size = 32;
    c.train.optimizer.epochs = 60;
  } else if (name == "full-scale") {
    c.train.model.encoder.d_v = 768;
    c.train.model.encoder.d_t = 768;
    c.train.model.encoder.d_cm = 768;
    c.train.model.fccr.d_c = 768;
    c.train.model.fccr.d_f = 768;
    c.train.model.fccr.hidden = 768;
    c.train.model.fccr.n_heads = 12;
    c.train.optimizer.lr = 5e-5;
    c.train.optimizer.batch_size = 32;
    c.train.optimizer.epochs = 10;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
}

void set_value(RunConfig& config, const std::string& key,
               const std::string& value) {
  if (key == "preset") {
    apply_preset(config, value);
    return;
  }
  if (key.starts_with(kWeightPrefix)) {
    const std::string name = key.substr(kWeightPrefix.size());
    parse_strategy(name);
    config.train.generator.strategy_weights[name] = parse_number<double>(key, value);
    return;
  }
  for (const auto& e : registry()) {
    if (e.key == key) {
      e.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& config, const std::string& text,
                       const std::string& origin) {
  std::istringstream in(text);
  std::string raw;
  int n = 0;
  while (std::getline(in, raw)) {
    ++n;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": expected key = value");
    }
    try {
      set_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str(), path);
}

std::string dump_config(const RunConfig& config) {
  std::string out;
  for (const auto& e : registry()) out += e.key + " = " + e.get(config) + "\n";
  for (const auto& [name, w] : config.train.generator.strategy_weights) {
    out += std::string(kWeightPrefix) + name + " = " + fmt(w) + "\n";
  }
  return out;
}

}  // namespace contextguard
