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

// Human-evaluation backend: challenging-pair selection, a durable judgment
// store and the HTTP API the annotation frontend talks to.
//
// Store directory layout:
//   tasks.jsonl       one task per line, sorted by pair id
//   predictions.jsonl {"variant","pair_id","verdict"} per line
//   annotators.txt    one annotator id per line
//   judgments.jsonl   append-only log; the last line per (pair, annotator)
//                     wins on replay

#ifndef CONTEXTGUARD_ANNOTATION_HPP_
#define CONTEXTGUARD_ANNOTATION_HPP_

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "contextguard/datagen.hpp"
#include "contextguard/eval.hpp"

namespace contextguard {

inline constexpr int kDefaultRequiredJudgments = 5;
inline constexpr std::size_t kDefaultChallengingPairs = 200;

struct AnnotationTask {
  std::string pair_id;
  std::string display_text;
  std::string scene_summary;
  SceneDescriptor scene;
  int required_judgments = kDefaultRequiredJudgments;
  // Distinct annotators who judged this pair.
  int judgments = 0;
  bool done() const { return judgments >= required_judgments; }
};

// Overall verdicts of one model variant, true = Consistent.
struct PredictionSet {
  std::string variant;
  std::map<std::string, bool> verdicts;
};

struct Selection {
  std::vector<AnnotationTask> tasks;
  std::size_t qualifying = 0;
  // Fewer than n pairs qualified.
  bool warning = false;
};

// Pairs that `full` gets right and every baseline gets wrong, lowest ids
// first, at most n. Throws std::invalid_argument without a baseline.
Selection select_challenging(std::span<const PairRecord> records,
                             const PredictionSet& full,
                             const std::vector<PredictionSet>& baselines,
                             std::size_t n, const SyntheticWorld& world,
                             int required_judgments = kDefaultRequiredJudgments);

class AnnotationError : public std::runtime_error {
 public:
  AnnotationError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

struct AgreementRow {
  std::string variant;
  double agreement = 0.0;
};

struct AgreementReport {
  std::size_t done_tasks = 0;
  std::vector<AgreementRow> rows;
};

class AnnotationStore {
 public:
  // Writes a fresh store into `dir` (created if missing; an existing
  // judgment log is kept).
  static void create(const std::string& dir,
                     const std::vector<AnnotationTask>& tasks,
                     const std::vector<PredictionSet>& predictions,
                     const std::vector<std::string>& annotators);

  // Opens an existing store and replays its judgment log.
  explicit AnnotationStore(std::string dir);

  // Open task this annotator has not judged, lowest pair id first.
  std::optional<AnnotationTask> next_task(const std::string& annotator) const;
  // Number of tasks the annotator has judged, and the task total.
  std::pair<std::size_t, std::size_t> progress(const std::string& annotator) const;

  // Appends to the log and syncs it before returning. A resubmission by the
  // same annotator replaces the earlier verdict. Returns the updated task.
  AnnotationTask submit(HumanJudgment judgment);

  std::optional<AnnotationTask> task(const std::string& pair_id) const;
  std::vector<AnnotationTask> tasks() const;
  // Current judgments per pair, annotators in id order.
  std::map<std::string, std::vector<HumanJudgment>> judgments() const;

  // Consensus over done tasks vs. each stored prediction set.
  AgreementReport report() const;

  // Rewrites the log with one line per (pair, annotator).
  void compact();

  const std::vector<std::string>& annotators() const { return annotators_; }
  const std::string& dir() const { return dir_; }

 private:
  void require_annotator(const std::string& annotator) const;
  void apply(const HumanJudgment& j);

  std::string dir_;
  std::vector<std::string> annotators_;
  std::map<std::string, AnnotationTask> tasks_;
  std::vector<PredictionSet> predictions_;
  std::map<std::string, std::map<std::string, HumanJudgment>> judgments_;
  mutable std::mutex mu_;
};

std::string task_to_json(const AnnotationTask& task);
std::string judgment_to_json(const HumanJudgment& j);
HumanJudgment judgment_from_json(const std::string& line);
std::string report_to_json(const AgreementReport& report);

// HTTP API over a store:
//   GET  /api/tasks/next?annotator=ID   200 task | 204
//   POST /api/judgments                 201
//   GET  /api/report                    200 | 409
//   GET  /api/pairs/{id}                200 | 404
// Errors are {"code","message"}. Static files, if a directory is given,
// are served from /.
class AnnotationServer {
 public:
  explicit AnnotationServer(AnnotationStore& store,
                            const std::string& static_dir = "");
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Binds; port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace contextguard

#endif  // CONTEXTGUARD_ANNOTATION_HPP_
