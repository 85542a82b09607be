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


#include "contextguard/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <mutex>

#include "contextguard/parallel.hpp"

namespace contextguard {

PreparedData prepare_data(const RunConfig& config, std::uint64_t seed) {
  GenConfig gen = config.gen;
  gen.seed = seed;
  gen.validate();
  PreparedData d{SyntheticWorld::make_default(gen.vocab, gen.span_length), {}};
  d.corpus = split_corpus(generate_corpus(gen, d.world, config.workers),
                          config.split, seed);
  for (auto& p : make_perturbed_test_set(d.corpus, d.world, seed,
                                         gen.subtle_difficulty)) {
    d.corpus.records.push_back(std::move(p));
  }
  return d;
}

PreparedData load_or_prepare_data(const RunConfig& config) {
  if (config.corpus_path.empty()) return prepare_data(config, config.seed);
  PreparedData d{SyntheticWorld::make_default(config.gen.vocab,
                                              config.gen.span_length),
                 load_corpus(config.corpus_path, config.gen.vocab)};
  validate_corpus(d.corpus);
  return d;
}

std::vector<PairRecord> records_in(const Corpus& corpus, Split split) {
  std::vector<PairRecord> out;
  for (const auto& r : corpus.records) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

std::vector<Variant> ablation_variants() {
  return {{"full", Paradigm::kAdversarial, false},
          {"w/o FCCR", Paradigm::kAdversarial, true},
          {"w/o RL/Adv", Paradigm::kSupervised, false},
          {"w/o both", Paradigm::kSupervised, true}};
}

std::vector<Variant> paradigm_variants() {
  return {{"rl", Paradigm::kRl, false},
          {"adversarial", Paradigm::kAdversarial, false}};
}

TrainConfig variant_train_config(const RunConfig& config, const Variant& v,
                                 std::uint64_t seed) {
  TrainConfig tc = config.train;
  tc.paradigm = v.paradigm;
  tc.model.no_fccr = v.no_fccr;
  tc.seed = seed;
  return tc;
}

std::vector<VariantResult> run_variants(
    const RunConfig& config, const std::vector<Variant>& variants,
    const std::vector<std::uint64_t>& seeds, int workers,
    const std::function<void(const VariantResult&)>& on_result) {
  std::vector<PreparedData> data(seeds.size());
  parallel_for(seeds.size(), workers,
               [&](std::size_t i) { data[i] = prepare_data(config, seeds[i]); });

  const std::size_t nv = variants.size();
  std::vector<VariantResult> results(seeds.size() * nv);
  std::mutex report_mu;
  parallel_for(results.size(), workers, [&](std::size_t job) {
    const std::size_t si = job / nv;
    const Variant& v = variants[job % nv];
    const PreparedData& d = data[si];
    const auto t0 = std::chrono::steady_clock::now();
    const TrainConfig tc = variant_train_config(config, v, seeds[si]);
    const TrainResult trained = train(d.corpus.records, d.world, tc);
    const ModelConfig mc = resolve_model_config(tc.model, d.world);
    const Predictor predictor = model_predictor(trained.model, mc);
    const auto test = records_in(d.corpus, Split::kTest);
    const auto perturbed = perturbed_evaluation_set(d.corpus);

    VariantResult r;
    r.variant = v.name;
    r.seed = seeds[si];
    const auto scores = predict_all(test, predictor);
    std::vector<bool> preds, labels;
    for (std::size_t i = 0; i < test.size(); ++i) {
      preds.push_back(binarize(scores[i], config.threshold).overall);
      labels.push_back(test[i].overall_consistent);
    }
    const ConfusionCounts cc = confusion(preds, labels);
    r.test_accuracy = accuracy(cc);
    r.test_f1 = f1(cc);
    r.robustness = robustness_eval(predictor, test, perturbed, config.threshold);
    r.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    results[job] = r;
    if (on_result) {
      std::lock_guard<std::mutex> lock(report_mu);
      on_result(r);
    }
  });
  return results;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<VariantSummary> summarize(const std::vector<VariantResult>& results,
                                      const std::vector<Variant>& variants) {
  std::vector<VariantSummary> out;
  for (const auto& v : variants) {
    std::vector<double> acc, f, standard, perturbed, drop;
    for (const auto& r : results) {
      if (r.variant != v.name) continue;
      acc.push_back(r.test_accuracy);
      f.push_back(r.test_f1);
      standard.push_back(r.robustness.standard_acc);
      perturbed.push_back(r.robustness.perturbed_acc);
      drop.push_back(r.robustness.drop);
    }
    if (acc.empty()) continue;
    out.push_back({v.name, median(acc), median(f), median(standard),
                   median(perturbed), median(drop), acc});
  }
  return out;
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, int n) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < n; ++i) out.push_back(first + static_cast<std::uint64_t>(i));
  return out;
}

}  // namespace contextguard
