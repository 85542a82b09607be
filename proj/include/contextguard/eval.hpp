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

// Metrics and grouped reports. The positive class is Inconsistent
// throughout: a true positive is an inconsistent pair predicted
// inconsistent.

#ifndef CONTEXTGUARD_EVAL_HPP_
#define CONTEXTGUARD_EVAL_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "contextguard/fccr.hpp"

namespace contextguard {

inline constexpr double kDefaultThreshold = 0.5;

// true = Consistent.
struct PredictedLabels {
  bool overall = true;
  std::array<bool, kNumDimensions> per_dimension{};
};

// label = score >= threshold. Throws std::invalid_argument unless the
// threshold lies in (0,1).
PredictedLabels binarize(const VerdictScores& scores,
                         double threshold = kDefaultThreshold);

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

// preds and labels hold Consistent = true. Throws std::invalid_argument on
// a length mismatch or empty input.
ConfusionCounts confusion(const std::vector<bool>& preds,
                          const std::vector<bool>& labels);
double accuracy(const ConfusionCounts& cc);
double precision(const ConfusionCounts& cc);
double recall(const ConfusionCounts& cc);
double f1(const ConfusionCounts& cc);

using Predictor = std::function<VerdictScores(const PairRecord&)>;

Predictor model_predictor(const ModelState& model, const ModelConfig& config);
// Reads the stored labels: 1 - 1e-9 for Consistent, 1e-9 otherwise, 0.5
// for unannotated dimensions.
Predictor oracle_predictor();

// Scores in record order; workers > 1 scores records concurrently.
std::vector<VerdictScores> predict_all(std::span<const PairRecord> records,
                                       const Predictor& predictor,
                                       int workers = 1);

enum class ReportKind { kEntity, kCtxt };
std::string_view to_string(ReportKind k);
ReportKind parse_report_kind(std::string_view name);

struct ReportColumn {
  DatasetProfile profile;
  std::string group;
  friend auto operator<=>(const ReportColumn&, const ReportColumn&) = default;
};

// Entity: TamperedNewsEnt and News400Ent x {PER, LOC, EVT}, MMGEnt x
// {LCt, LCo, LCn}. Ctxt: each profile x its annotated dimensions.
std::vector<ReportColumn> report_columns(ReportKind kind);

struct ReportCell {
  double accuracy = 0.0;
  double f1 = 0.0;
  double recall = 0.0;
  std::size_t n = 0;
};

struct ReportTable {
  ReportKind kind = ReportKind::kEntity;
  std::vector<ReportColumn> columns;
  std::vector<std::string> rows;
  // Missing entries are groups with no records.
  std::map<std::pair<std::string, ReportColumn>, ReportCell> cells;

  const ReportCell* cell(const std::string& row, const ReportColumn& col) const;
  // Aligned text, one block per metric.
  std::string to_text() const;
  // One line per (row, profile, group, metric): {"row","profile","group",
  // "metric","value","n"}.
  std::string to_jsonl() const;
};

// The records of one report group and the score each is judged by.
struct GroupMember {
  const PairRecord* record = nullptr;
  bool use_dimension = false;  // score S_k instead of the overall score
  ContextDimension dimension = ContextDimension::kSentiment;
  bool label = true;
};

// Group membership over `records` (normally the test split):
//  - PER/LOC/EVT: inconsistent records whose entity label of that type is
//    false, plus as many consistent records of the profile (lowest ids);
//    overall verdict.
//  - LCt: MMGEnt LOC group.
//  - LCo: MMGEnt inconsistent records whose lineage source is also in
//    `records`, together with those sources; overall verdict.
//  - LCn: every MMGEnt record, LogicalCoherence head.
//  - dimension groups: records of the profile with that label false plus as
//    many consistent records; S_k verdict.
std::vector<GroupMember> group_members(std::span<const PairRecord> records,
                                       const ReportColumn& column);

// Adds `row` to `table` from per-record scores aligned with `records`.
void add_report_row(ReportTable& table, const std::string& row,
                    std::span<const PairRecord> records,
                    const std::vector<VerdictScores>& scores,
                    double threshold = kDefaultThreshold);

ReportTable evaluate(const Predictor& predictor,
                     std::span<const PairRecord> records, ReportKind kind,
                     const std::string& row = "model",
                     double threshold = kDefaultThreshold, int workers = 1);

// Overall accuracy of `predictor` on `records`.
double overall_accuracy(const Predictor& predictor,
                        std::span<const PairRecord> records,
                        double threshold = kDefaultThreshold, int workers = 1);

struct RobustnessResult {
  double standard_acc = 0.0;
  double perturbed_acc = 0.0;
  double drop = 0.0;
};

RobustnessResult robustness_eval(const Predictor& predictor,
                                 std::span<const PairRecord> standard_test,
                                 std::span<const PairRecord> perturbed_test,
                                 double threshold = kDefaultThreshold,
                                 int workers = 1);

// The perturbed_test records of `corpus` together with their consistent
// sources, so the set is balanced.
std::vector<PairRecord> perturbed_evaluation_set(const Corpus& corpus);

struct HumanJudgment {
  std::string pair_id;
  std::string annotator_id;
  bool verdict = true;  // true = Consistent
  std::optional<ContextDimension> dimension;
  std::int64_t timestamp = 0;
};

// Majority verdict per pair; ties go to Inconsistent.
std::map<std::string, bool> consensus(
    const std::map<std::string, std::vector<HumanJudgment>>& by_pair);

// 100 * fraction of pairs where the model verdict equals consensus. Throws
// std::invalid_argument when the pair sets differ or are empty.
double agreement(const std::map<std::string, bool>& model_preds,
                 const std::map<std::string, bool>& consensus_verdicts);

}  // namespace contextguard

#endif  // CONTEXTGUARD_EVAL_HPP_
