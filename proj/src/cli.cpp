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


#include "contextguard/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "contextguard/config.hpp"
#include "contextguard/experiments.hpp"
#include "json.hpp"

namespace contextguard {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

struct Options {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string paradigm;
  std::optional<int> workers;
  std::optional<int> epochs;
  bool oracle = false;
  std::vector<std::string> sets;
};

struct Context {
  RunConfig config;
  fs::path dir;
  bool oracle = false;
  std::ostream& out;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f.flush()) throw DataError("write failed for " + path.string());
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

RunConfig resolve_config(const Options& o) {
  RunConfig c = default_run_config();
  if (!o.config_path.empty()) apply_config_file(c, o.config_path);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
    set_value(c, s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.seed) c.seed = *o.seed;
  if (!o.paradigm.empty()) c.train.paradigm = parse_paradigm(o.paradigm);
  if (o.workers) c.workers = *o.workers;
  if (o.epochs) c.train.optimizer.epochs = *o.epochs;
  c.validate();
  for (const auto* p : {&c.corpus_path, &c.checkpoint_path}) {
    if (!p->empty() && !fs::exists(*p)) throw ConfigError("path not found: " + *p);
  }
  return c;
}

fs::path output_dir(const Options& o) {
  if (!o.out.empty()) return o.out;
  const char* env = std::getenv("CONTEXTGUARD_OUT");
  const fs::path root = env != nullptr && *env != '\0' ? fs::path(env) : fs::path("runs");
  return root / o.command;
}

void check_layout(const ModelState& expected, const ModelState& loaded) {
  if (expected.no_fccr != loaded.no_fccr) {
    throw ConfigError("checkpoint and config disagree on model.no_fccr");
  }
  for_each_tensor(
      [](const std::string& path, const auto& a, const auto& b) {
        if (a.rows() != b.rows() || a.cols() != b.cols()) {
          throw ConfigError("checkpoint tensor " + path +
                            " does not match the model config");
        }
      },
      const_cast<ModelState&>(expected), const_cast<ModelState&>(loaded));
}

struct TrainedModel {
  ModelConfig config;
  ModelState model;
};

TrainedModel obtain_model(const Context& ctx, const PreparedData& data) {
  TrainConfig tc = ctx.config.train;
  tc.seed = ctx.config.seed;
  TrainedModel out{resolve_model_config(tc.model, data.world), {}};
  if (!ctx.config.checkpoint_path.empty()) {
    out.model = load_checkpoint(ctx.config.checkpoint_path);
    check_layout(initial_model(out.config, data.world, 0), out.model);
  } else {
    out.model = train(data.corpus.records, data.world, tc).model;
  }
  return out;
}

std::string predictions_jsonl(std::span<const PairRecord> records,
                              const std::vector<VerdictScores>& scores) {
  std::string out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    ordered_json j;
    j["id"] = records[i].id;
    j["overall"] = scores[i].overall;
    for (ContextDimension d : records[i].annotated_dimensions()) {
      j["dimensions"][std::string(to_string(d))] = scores[i].dimension(d);
    }
    out += j.dump() + "\n";
  }
  return out;
}

// --- commands ---------------------------------------------------------------

void cmd_gen(Context& ctx) {
  const PreparedData d = prepare_data(ctx.config, ctx.config.seed);
  validate_corpus(d.corpus);
  save_corpus(d.corpus, (ctx.dir / "corpus.jsonl").string());
  save_grammar(d.world.grammar, (ctx.dir / "grammar.jsonl").string());
  save_compatibility(d.world.compat, (ctx.dir / "compatibility.jsonl").string());
  std::map<std::string, std::size_t> counts;
  for (const auto& r : d.corpus.records) {
    counts[std::string(to_string(r.split))]++;
  }
  ctx.out << "records " << d.corpus.records.size();
  for (const auto& [split, n] : counts) ctx.out << "  " << split << " " << n;
  ctx.out << "\n";
}

void cmd_train(Context& ctx) {
  const PreparedData d = load_or_prepare_data(ctx.config);
  TrainConfig tc = ctx.config.train;
  tc.seed = ctx.config.seed;
  std::ofstream log(ctx.dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
  if (!log) throw DataError("cannot write train_log.jsonl");
  const TrainResult r = train(d.corpus.records, d.world, tc,
                              [&](const TrainStats& s) {
                                log << s.to_json_line() << "\n";
                                log.flush();
                              });
  save_checkpoint(r.model, (ctx.dir / "checkpoint.txt").string());
  if (tc.paradigm == Paradigm::kAdversarial) {
    std::string weights;
    for (const auto& [name, w] : r.generator.normalized()) {
      ordered_json j;
      j["strategy"] = name;
      j["weight"] = w;
      weights += j.dump() + "\n";
    }
    write_text(ctx.dir / "generator.jsonl", weights);
  }
  const ModelConfig mc = resolve_model_config(tc.model, d.world);
  const auto test = records_in(d.corpus, Split::kTest);
  ctx.out << "paradigm " << to_string(tc.paradigm) << "  epochs "
          << tc.optimizer.epochs << "  steps " << (r.log.empty() ? 0 : r.log.back().step);
  if (!test.empty()) {
    ctx.out << "  test_accuracy "
            << fixed(overall_accuracy(model_predictor(r.model, mc), test,
                                      ctx.config.threshold, ctx.config.workers));
  }
  ctx.out << "\n";
}

void cmd_eval(Context& ctx) {
  const PreparedData d = load_or_prepare_data(ctx.config);
  const auto test = records_in(d.corpus, Split::kTest);
  if (test.empty()) throw DataError("corpus has no test records");
  Predictor predictor;
  std::string row = "oracle";
  std::optional<TrainedModel> trained;
  if (ctx.oracle) {
    predictor = oracle_predictor();
  } else {
    trained = obtain_model(ctx, d);
    predictor = model_predictor(trained->model, trained->config);
    row = std::string(to_string(ctx.config.train.paradigm));
  }
  const auto scores = predict_all(test, predictor, ctx.config.workers);
  std::string text, jsonl;
  for (ReportKind kind : {ReportKind::kEntity, ReportKind::kCtxt}) {
    ReportTable table;
    table.kind = kind;
    table.columns = report_columns(kind);
    add_report_row(table, row, test, scores, ctx.config.threshold);
    text += std::string(kind == ReportKind::kEntity ? "Entity" : "CTXT") + " report\n" +
            table.to_text() + "\n";
    jsonl += table.to_jsonl();
  }
  write_text(ctx.dir / "report.txt", text);
  write_text(ctx.dir / "report.jsonl", jsonl);
  write_text(ctx.dir / "predictions.jsonl", predictions_jsonl(test, scores));
  ctx.out << text;
}

void cmd_robustness(Context& ctx) {
  std::string text = "variant           standard  perturbed  drop\n";
  std::string jsonl;
  auto add = [&](const std::string& name, const RobustnessResult& r) {
    char line[160];
    std::snprintf(line, sizeof line, "%-16s  %8.4f  %9.4f  %+.4f\n", name.c_str(),
                  r.standard_acc, r.perturbed_acc, r.drop);
    text += line;
    ordered_json j;
    j["variant"] = name;
    j["standard_accuracy"] = r.standard_acc;
    j["perturbed_accuracy"] = r.perturbed_acc;
    j["drop"] = r.drop;
    jsonl += j.dump() + "\n";
  };
  if (ctx.oracle) {
    const PreparedData d = load_or_prepare_data(ctx.config);
    const auto test = records_in(d.corpus, Split::kTest);
    add("oracle", robustness_eval(oracle_predictor(), test,
                                  perturbed_evaluation_set(d.corpus),
                                  ctx.config.threshold, ctx.config.workers));
  } else {
    const std::vector<Variant> variants = {{"supervised", Paradigm::kSupervised, false},
                                           {"adversarial", Paradigm::kAdversarial, false}};
    const auto results = run_variants(ctx.config, variants,
                                      seed_range(ctx.config.seed, ctx.config.n_seeds),
                                      ctx.config.workers);
    for (const auto& s : summarize(results, variants)) {
      add(s.variant, {s.median_standard, s.median_perturbed, s.median_drop});
    }
  }
  write_text(ctx.dir / "robustness.txt", text);
  write_text(ctx.dir / "robustness.jsonl", jsonl);
  ctx.out << text;
}

void variant_table(Context& ctx, const std::vector<Variant>& variants,
                   const std::string& stem) {
  const auto seeds = seed_range(ctx.config.seed, ctx.config.n_seeds);
  std::string per_seed;
  const auto results = run_variants(ctx.config, variants, seeds, ctx.config.workers);
  for (const auto& r : results) {
    ordered_json j;
    j["variant"] = r.variant;
    j["seed"] = r.seed;
    j["accuracy"] = r.test_accuracy;
    j["f1"] = r.test_f1;
    j["perturbed_accuracy"] = r.robustness.perturbed_acc;
    per_seed += j.dump() + "\n";
  }
  std::string text = "variant           accuracy  f1      perturbed  (median over " +
                     std::to_string(seeds.size()) + " seeds)\n";
  std::string jsonl;
  for (const auto& s : summarize(results, variants)) {
    char line[160];
    std::snprintf(line, sizeof line, "%-16s  %8.4f  %6.4f  %9.4f\n", s.variant.c_str(),
                  s.median_accuracy, s.median_f1, s.median_perturbed);
    text += line;
    ordered_json j;
    j["variant"] = s.variant;
    j["accuracy"] = s.median_accuracy;
    j["f1"] = s.median_f1;
    j["perturbed_accuracy"] = s.median_perturbed;
    jsonl += j.dump() + "\n";
  }
  write_text(ctx.dir / (stem + ".txt"), text);
  write_text(ctx.dir / (stem + ".jsonl"), jsonl);
  write_text(ctx.dir / (stem + "_seeds.jsonl"), per_seed);
  ctx.out << text;
}

void prepare_store(Context& ctx, const fs::path& store) {
  const PreparedData d = prepare_data(ctx.config, ctx.config.seed);
  const auto test = records_in(d.corpus, Split::kTest);
  std::vector<PredictionSet> sets;
  for (const auto& v : ablation_variants()) {
    const TrainConfig tc = variant_train_config(ctx.config, v, ctx.config.seed);
    const TrainResult r = train(d.corpus.records, d.world, tc);
    const auto scores = predict_all(
        test, model_predictor(r.model, resolve_model_config(tc.model, d.world)),
        ctx.config.workers);
    PredictionSet set{v.name, {}};
    for (std::size_t i = 0; i < test.size(); ++i) {
      set.verdicts[test[i].id] = binarize(scores[i], ctx.config.threshold).overall;
    }
    sets.push_back(std::move(set));
  }
  const std::vector<PredictionSet> baselines(sets.begin() + 1, sets.end());
  const Selection sel = select_challenging(test, sets.front(), baselines,
                                           ctx.config.serve.n_pairs, d.world,
                                           ctx.config.serve.required_judgments);
  if (sel.warning) {
    ctx.out << "warning: only " << sel.qualifying << " pairs qualify (wanted "
            << ctx.config.serve.n_pairs << ")\n";
  }
  AnnotationStore::create(store.string(), sel.tasks, sets, ctx.config.serve.annotators);
}

void cmd_serve(Context& ctx) {
  const fs::path store_dir = ctx.dir / "store";
  if (!fs::exists(store_dir / "tasks.jsonl")) prepare_store(ctx, store_dir);
  AnnotationStore store(store_dir.string());
  store.compact();
  AnnotationServer server(store, ctx.config.serve.static_dir);
  const int port = server.bind(ctx.config.serve.host, ctx.config.serve.port);
  if (port < 0) {
    throw ConfigError("cannot bind " + ctx.config.serve.host + ":" +
                      std::to_string(ctx.config.serve.port));
  }
  ctx.out << "serving " << store.tasks().size() << " tasks from " << store_dir.string()
          << " on http://" << ctx.config.serve.host << ":" << port << "\n";
  ctx.out.flush();
  server.listen();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  Options o;
  CLI::App app{"Fine-grained image-text consistency verification toolkit",
               "contextguard"};
  app.require_subcommand(1);
  app.add_option("--config", o.config_path, "key = value config file");
  app.add_option("--seed", o.seed, "run seed");
  app.add_option("--out", o.out,
                 "artifact directory (default $CONTEXTGUARD_OUT/<command> or "
                 "runs/<command>)");
  app.add_option("--paradigm", o.paradigm, "supervised, rl or adversarial");
  app.add_option("--workers", o.workers, "worker threads");
  app.add_option("--epochs", o.epochs, "training epochs");
  app.add_flag("--oracle", o.oracle, "score with the label oracle");
  app.add_option("--set", o.sets, "KEY=VALUE override, repeatable")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  const std::map<std::string, std::string> commands = {
      {"gen", "generate the corpus and perturbed test set"},
      {"train", "train one model"},
      {"eval", "entity and CTXT report tables"},
      {"robustness", "accuracy on the subtly perturbed test set"},
      {"ablate", "component ablation over several seeds"},
      {"paradigms", "rl vs adversarial over several seeds"},
      {"serve", "annotation backend"}};
  for (const auto& [name, help] : commands) {
    app.add_subcommand(name, help)->fallthrough();
  }

  if (argc > 1 && argv[1][0] != '-' && !commands.count(argv[1])) {
    err << "error: unknown command '" << argv[1] << "'\n" << app.help();
    return kExitUsage;
  }
  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }
  o.command = app.get_subcommands().front()->get_name();

  try {
    Context ctx{resolve_config(o), output_dir(o), o.oracle, out};
    fs::create_directories(ctx.dir);
    write_text(ctx.dir / "config.txt", dump_config(ctx.config));
    if (o.command == "gen") cmd_gen(ctx);
    else if (o.command == "train") cmd_train(ctx);
    else if (o.command == "eval") cmd_eval(ctx);
    else if (o.command == "robustness") cmd_robustness(ctx);
    else if (o.command == "ablate") variant_table(ctx, ablation_variants(), "ablation");
    else if (o.command == "paradigms") variant_table(ctx, paradigm_variants(), "paradigms");
    else if (o.command == "serve") cmd_serve(ctx);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const TrainingDivergence& e) {
    err << "training diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace contextguard
