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

#include "contextguard/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include "contextguard/parallel.hpp"
#include "json.hpp"

namespace contextguard {

PredictedLabels binarize(const VerdictScores& scores, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("threshold must lie in (0,1)");
  }
  PredictedLabels p;
  p.overall = scores.overall >= threshold;
  for (int k = 0; k < kNumDimensions; ++k) {
    p.per_dimension[k] = scores.per_dimension[k] >= threshold;
  }
  return p;
}

ConfusionCounts confusion(const std::vector<bool>& preds,
                          const std::vector<bool>& labels) {
  if (preds.size() != labels.size()) {
    throw std::invalid_argument("confusion: length mismatch");
  }
  if (preds.empty()) throw std::invalid_argument("confusion: empty input");
  ConfusionCounts cc;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool pred_pos = !preds[i];
    const bool label_pos = !labels[i];
    if (pred_pos && label_pos) ++cc.tp;
    else if (pred_pos) ++cc.fp;
    else if (label_pos) ++cc.fn;
    else ++cc.tn;
  }
  return cc;
}

double accuracy(const ConfusionCounts& cc) {
  const auto n = cc.total();
  return n == 0 ? 0.0 : static_cast<double>(cc.tp + cc.tn) / static_cast<double>(n);
}

double precision(const ConfusionCounts& cc) {
  const auto d = cc.tp + cc.fp;
  return d == 0 ? 0.0 : static_cast<double>(cc.tp) / static_cast<double>(d);
}

double recall(const ConfusionCounts& cc) {
  const auto d = cc.tp + cc.fn;
  return d == 0 ? 0.0 : static_cast<double>(cc.tp) / static_cast<double>(d);
}

double f1(const ConfusionCounts& cc) {
  const double p = precision(cc), r = recall(cc);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

Predictor model_predictor(const ModelState& model, const ModelConfig& config) {
  return [&model, config](const PairRecord& r) {
    return forward(r, model, config);
  };
}

Predictor oracle_predictor() {
  return [](const PairRecord& r) {
    auto score = [](bool consistent) {
      return consistent ? 1.0 - kScoreClip : kScoreClip;
    };
    VerdictScores s;
    s.overall = score(r.overall_consistent);
    for (int k = 0; k < kNumDimensions; ++k) {
      s.per_dimension[k] = r.ctxt_labels[k] ? score(*r.ctxt_labels[k]) : 0.5;
    }
    return s;
  };
}

std::vector<VerdictScores> predict_all(std::span<const PairRecord> records,
                                       const Predictor& predictor,
                                       int workers) {
  std::vector<VerdictScores> out(records.size());
  parallel_for(records.size(), workers,
               [&](std::size_t i) { out[i] = predictor(records[i]); });
  return out;
}

std::string_view to_string(ReportKind k) {
  return k == ReportKind::kEntity ? "entity" : "ctxt";
}

ReportKind parse_report_kind(std::string_view name) {
  if (name == "entity") return ReportKind::kEntity;
  if (name == "ctxt") return ReportKind::kCtxt;
  throw ConfigError("unknown report kind '" + std::string(name) +
                    "' (expected entity or ctxt)");
}

std::vector<ReportColumn> report_columns(ReportKind kind) {
  std::vector<ReportColumn> cols;
  if (kind == ReportKind::kEntity) {
    for (auto p : {DatasetProfile::kTamperedNewsEnt, DatasetProfile::kNews400Ent}) {
      for (auto g : {"PER", "LOC", "EVT"}) cols.push_back({p, g});
    }
    for (auto g : {"LCt", "LCo", "LCn"}) {
      cols.push_back({DatasetProfile::kMMGEnt, g});
    }
  } else {
    for (auto p : kAllProfiles) {
      for (auto d : default_profile_rules().at(p)) {
        cols.push_back({p, std::string(to_string(d))});
      }
    }
  }
  return cols;
}

namespace {

std::vector<const PairRecord*> by_id(std::span<const PairRecord> records,
                                     DatasetProfile profile) {
  std::vector<const PairRecord*> out;
  for (const auto& r : records) {
    if (r.dataset_profile == profile) out.push_back(&r);
  }
  std::sort(out.begin(), out.end(),
            [](const PairRecord* a, const PairRecord* b) { return a->id < b->id; });
  return out;
}

// Targeted records plus as many consistent ones, lowest ids first.
std::vector<GroupMember> balanced(const std::vector<const PairRecord*>& pool,
                                  const std::function<bool(const PairRecord&)>& targeted,
                                  bool use_dimension, ContextDimension d) {
  std::vector<GroupMember> out;
  for (const PairRecord* r : pool) {
    if (targeted(*r)) out.push_back({r, use_dimension, d, false});
  }
  std::size_t want = out.size();
  for (const PairRecord* r : pool) {
    if (want == 0) break;
    if (r->overall_consistent) {
      out.push_back({r, use_dimension, d, true});
      --want;
    }
  }
  return out;
}

}  // namespace

std::vector<GroupMember> group_members(std::span<const PairRecord> records,
                                       const ReportColumn& column) {
  const auto pool = by_id(records, column.profile);
  const std::string& g = column.group;
  for (EntityType e : kLabelledEntities) {
    const bool lct = g == "LCt" && e == EntityType::kLOC;
    if (g != to_string(e) && !lct) continue;
    return balanced(
        pool,
        [e](const PairRecord& r) {
          return !r.overall_consistent && r.label(e) == std::optional<bool>(false);
        },
        false, ContextDimension::kSentiment);
  }
  if (g == "LCo") {
    std::set<std::string> ids;
    for (const PairRecord* r : pool) ids.insert(r->id);
    std::vector<GroupMember> out;
    std::set<std::string> sources;
    for (const PairRecord* r : pool) {
      if (r->overall_consistent || !r->perturbation) continue;
      if (!ids.count(r->perturbation->source_id)) continue;
      out.push_back({r, false, ContextDimension::kSentiment, false});
      sources.insert(r->perturbation->source_id);
    }
    for (const PairRecord* r : pool) {
      if (sources.count(r->id)) {
        out.push_back({r, false, ContextDimension::kSentiment, r->overall_consistent});
      }
    }
    return out;
  }
  if (g == "LCn") {
    std::vector<GroupMember> out;
    constexpr auto lc = ContextDimension::kLogicalCoherence;
    for (const PairRecord* r : pool) {
      if (r->label(lc)) out.push_back({r, true, lc, *r->label(lc)});
    }
    return out;
  }
  const ContextDimension d = parse_dimension(g);
  return balanced(
      pool,
      [d](const PairRecord& r) {
        return r.label(d) == std::optional<bool>(false);
      },
      true, d);
}

const ReportCell* ReportTable::cell(const std::string& row,
                                    const ReportColumn& col) const {
  auto it = cells.find({row, col});
  return it == cells.end() ? nullptr : &it->second;
}

void add_report_row(ReportTable& table, const std::string& row,
                    std::span<const PairRecord> records,
                    const std::vector<VerdictScores>& scores,
                    double threshold) {
  if (scores.size() != records.size()) {
    throw std::invalid_argument("scores do not align with records");
  }
  if (std::find(table.rows.begin(), table.rows.end(), row) != table.rows.end()) {
    throw std::invalid_argument("duplicate report row " + row);
  }
  table.rows.push_back(row);
  const PairRecord* base = records.data();
  for (const auto& col : table.columns) {
    const auto members = group_members(records, col);
    if (members.empty()) continue;
    std::vector<bool> preds, labels;
    for (const auto& m : members) {
      const auto& s = scores[static_cast<std::size_t>(m.record - base)];
      const PredictedLabels p = binarize(s, threshold);
      preds.push_back(m.use_dimension ? p.per_dimension[index_of(m.dimension)]
                                      : p.overall);
      labels.push_back(m.label);
    }
    const ConfusionCounts cc = confusion(preds, labels);
    table.cells[{row, col}] = ReportCell{accuracy(cc), f1(cc), recall(cc), cc.total()};
  }
}

ReportTable evaluate(const Predictor& predictor,
                     std::span<const PairRecord> records, ReportKind kind,
                     const std::string& row, double threshold, int workers) {
  ReportTable table;
  table.kind = kind;
  table.columns = report_columns(kind);
  add_report_row(table, row, records, predict_all(records, predictor, workers),
                 threshold);
  return table;
}

namespace {

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

std::string ReportTable::to_text() const {
  std::size_t row_w = 8;
  for (const auto& r : rows) row_w = std::max(row_w, r.size() + 2);
  constexpr int kCellW = 18;
  std::ostringstream out;
  const std::pair<const char*, double ReportCell::*> metrics[] = {
      {"accuracy", &ReportCell::accuracy},
      {"f1", &ReportCell::f1},
      {"recall", &ReportCell::recall}};
  for (const auto& [name, field] : metrics) {
    char line[256];
    std::string header = name;
    header.resize(row_w, ' ');
    std::string groups(row_w, ' ');
    std::string profiles = header;
    for (const auto& c : columns) {
      std::snprintf(line, sizeof(line), "%*s", kCellW,
                    std::string(to_string(c.profile)).c_str());
      profiles += line;
      std::snprintf(line, sizeof(line), "%*s", kCellW, c.group.c_str());
      groups += line;
    }
    out << profiles << '\n' << groups << '\n';
    for (const auto& r : rows) {
      std::string text = r;
      text.resize(row_w, ' ');
      for (const auto& c : columns) {
        const ReportCell* cell = this->cell(r, c);
        std::snprintf(line, sizeof(line), "%*s", kCellW,
                      cell ? fmt3(cell->*field).c_str() : "-");
        text += line;
      }
      out << text << '\n';
    }
    out << '\n';
  }
  return out.str();
}

std::string ReportTable::to_jsonl() const {
  std::ostringstream out;
  for (const auto& r : rows) {
    for (const auto& c : columns) {
      const ReportCell* cell = this->cell(r, c);
      if (!cell) continue;
      const std::pair<const char*, double> metrics[] = {
          {"accuracy", cell->accuracy}, {"f1", cell->f1}, {"recall", cell->recall}};
      for (const auto& [name, value] : metrics) {
        nlohmann::ordered_json j;
        j["row"] = r;
        j["profile"] = to_string(c.profile);
        j["group"] = c.group;
        j["metric"] = name;
        j["value"] = value;
        j["n"] = cell->n;
        out << j.dump() << '\n';
      }
    }
  }
  return out.str();
}

double overall_accuracy(const Predictor& predictor,
                        std::span<const PairRecord> records, double threshold,
                        int workers) {
  if (records.empty()) throw std::invalid_argument("accuracy of an empty set");
  const auto scores = predict_all(records, predictor, workers);
  std::vector<bool> preds, labels;
  for (std::size_t i = 0; i < records.size(); ++i) {
    preds.push_back(binarize(scores[i], threshold).overall);
    labels.push_back(records[i].overall_consistent);
  }
  return accuracy(confusion(preds, labels));
}

RobustnessResult robustness_eval(const Predictor& predictor,
                                 std::span<const PairRecord> standard_test,
                                 std::span<const PairRecord> perturbed_test,
                                 double threshold, int workers) {
  RobustnessResult r;
  r.standard_acc = overall_accuracy(predictor, standard_test, threshold, workers);
  r.perturbed_acc = overall_accuracy(predictor, perturbed_test, threshold, workers);
  r.drop = r.standard_acc - r.perturbed_acc;
  return r;
}

std::vector<PairRecord> perturbed_evaluation_set(const Corpus& corpus) {
  std::vector<PairRecord> out;
  std::set<std::string> sources;
  for (const auto& r : corpus.records) {
    if (r.split != Split::kPerturbedTest) continue;
    out.push_back(r);
    if (r.perturbation) sources.insert(r.perturbation->source_id);
  }
  for (const auto& r : corpus.records) {
    if (sources.count(r.id)) out.push_back(r);
  }
  return out;
}

std::map<std::string, bool> consensus(
    const std::map<std::string, std::vector<HumanJudgment>>& by_pair) {
  std::map<std::string, bool> out;
  for (const auto& [id, js] : by_pair) {
    if (js.empty()) throw std::invalid_argument("no judgments for pair " + id);
    std::size_t yes = 0;
    for (const auto& j : js) yes += j.verdict ? 1 : 0;
    out[id] = 2 * yes > js.size();
  }
  return out;
}

double agreement(const std::map<std::string, bool>& model_preds,
                 const std::map<std::string, bool>& consensus_verdicts) {
  if (model_preds.size() != consensus_verdicts.size() || model_preds.empty()) {
    throw std::invalid_argument("agreement needs identical, nonempty pair sets");
  }
  std::size_t same = 0;
  for (const auto& [id, v] : consensus_verdicts) {
    auto it = model_preds.find(id);
    if (it == model_preds.end()) {
      throw std::invalid_argument("model has no prediction for pair " + id);
    }
    same += it->second == v ? 1 : 0;
  }
  return 100.0 * static_cast<double>(same) /
         static_cast<double>(consensus_verdicts.size());
}

}  // namespace contextguard
