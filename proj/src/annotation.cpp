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

#include "contextguard/annotation.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace contextguard {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kTasksFile = "tasks.jsonl";
constexpr const char* kPredictionsFile = "predictions.jsonl";
constexpr const char* kAnnotatorsFile = "annotators.txt";
constexpr const char* kJudgmentsFile = "judgments.jsonl";

ordered_json task_json(const AnnotationTask& t) {
  ordered_json j;
  j["pair_id"] = t.pair_id;
  j["display_text"] = t.display_text;
  j["scene_summary"] = t.scene_summary;
  j["scene"] = json::parse(scene_to_json_string(t.scene));
  j["status"] = t.done() ? "done" : "open";
  j["required_judgments"] = t.required_judgments;
  j["judgments"] = t.judgments;
  return j;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw DataError("write failed for " + path.string());
}

void append_synced(const fs::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) throw DataError("cannot open " + path.string());
  std::size_t off = 0;
  while (off < line.size()) {
    const ssize_t n = ::write(fd, line.data() + off, line.size() - off);
    if (n < 0) {
      ::close(fd);
      throw DataError("write failed for " + path.string());
    }
    off += static_cast<std::size_t>(n);
  }
  const bool synced = ::fsync(fd) == 0;
  ::close(fd);
  if (!synced) throw DataError("fsync failed for " + path.string());
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

Selection select_challenging(std::span<const PairRecord> records,
                             const PredictionSet& full,
                             const std::vector<PredictionSet>& baselines,
                             std::size_t n, const SyntheticWorld& world,
                             int required_judgments) {
  if (baselines.empty()) {
    throw std::invalid_argument("select_challenging needs at least one baseline");
  }
  std::vector<const PairRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const PairRecord* a, const PairRecord* b) { return a->id < b->id; });
  auto verdict = [](const PredictionSet& p, const std::string& id) {
    auto it = p.verdicts.find(id);
    if (it == p.verdicts.end()) {
      throw std::invalid_argument("variant " + p.variant +
                                  " has no prediction for " + id);
    }
    return it->second;
  };
  Selection out;
  for (const PairRecord* r : sorted) {
    const bool truth = r->overall_consistent;
    if (verdict(full, r->id) != truth) continue;
    bool all_wrong = true;
    for (const auto& b : baselines) all_wrong = all_wrong && verdict(b, r->id) != truth;
    if (!all_wrong) continue;
    ++out.qualifying;
    if (out.tasks.size() >= n) continue;
    AnnotationTask t;
    t.pair_id = r->id;
    t.display_text = detokenize(r->text_tokens, world.grammar);
    t.scene_summary = scene_summary(r->scene);
    t.scene = r->scene;
    t.required_judgments = required_judgments;
    out.tasks.push_back(std::move(t));
  }
  out.warning = out.qualifying < n;
  return out;
}

std::string task_to_json(const AnnotationTask& task) {
  return task_json(task).dump();
}

std::string judgment_to_json(const HumanJudgment& j) {
  ordered_json o;
  o["pair_id"] = j.pair_id;
  o["annotator"] = j.annotator_id;
  o["verdict"] = j.verdict;
  if (j.dimension) o["dimension"] = std::string(to_string(*j.dimension));
  o["timestamp"] = j.timestamp;
  return o.dump();
}

HumanJudgment judgment_from_json(const std::string& line) {
  const json o = json::parse(line);
  HumanJudgment j;
  j.pair_id = o.at("pair_id").get<std::string>();
  j.annotator_id = o.at("annotator").get<std::string>();
  j.verdict = o.at("verdict").get<bool>();
  if (o.contains("dimension") && !o.at("dimension").is_null()) {
    j.dimension = parse_dimension(o.at("dimension").get<std::string>());
  }
  if (o.contains("timestamp")) j.timestamp = o.at("timestamp").get<std::int64_t>();
  return j;
}

std::string report_to_json(const AgreementReport& report) {
  ordered_json o;
  o["done_tasks"] = report.done_tasks;
  o["rows"] = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json row;
    row["variant"] = r.variant;
    row["agreement"] = r.agreement;
    o["rows"].push_back(row);
  }
  return o.dump();
}

void AnnotationStore::create(const std::string& dir,
                             const std::vector<AnnotationTask>& tasks,
                             const std::vector<PredictionSet>& predictions,
                             const std::vector<std::string>& annotators) {
  if (annotators.empty()) throw ConfigError("annotation store needs annotators");
  fs::create_directories(dir);
  std::vector<AnnotationTask> sorted = tasks;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.pair_id < b.pair_id; });
  std::string t, p, a;
  for (auto task : sorted) {
    task.judgments = 0;
    ordered_json j = task_json(task);
    j.erase("status");
    j.erase("judgments");
    t += j.dump() + "\n";
  }
  for (const auto& set : predictions) {
    for (const auto& [id, v] : set.verdicts) {
      ordered_json j;
      j["variant"] = set.variant;
      j["pair_id"] = id;
      j["verdict"] = v;
      p += j.dump() + "\n";
    }
  }
  for (const auto& id : annotators) a += id + "\n";
  write_file(fs::path(dir) / kTasksFile, t);
  write_file(fs::path(dir) / kPredictionsFile, p);
  write_file(fs::path(dir) / kAnnotatorsFile, a);
  const fs::path log = fs::path(dir) / kJudgmentsFile;
  if (!fs::exists(log)) write_file(log, "");
}

AnnotationStore::AnnotationStore(std::string dir) : dir_(std::move(dir)) {
  const fs::path root(dir_);
  for (const auto& line : read_lines(root / kAnnotatorsFile)) {
    annotators_.push_back(line);
  }
  std::size_t n = 0;
  for (const auto& line : read_lines(root / kTasksFile)) {
    ++n;
    try {
      const json j = json::parse(line);
      AnnotationTask t;
      t.pair_id = j.at("pair_id").get<std::string>();
      t.display_text = j.at("display_text").get<std::string>();
      t.scene_summary = j.at("scene_summary").get<std::string>();
      t.scene = scene_from_json_string(j.at("scene").dump());
      t.required_judgments = j.at("required_judgments").get<int>();
      tasks_[t.pair_id] = std::move(t);
    } catch (const std::exception& e) {
      throw DataError(dir_ + "/" + kTasksFile + ":" + std::to_string(n) + ": " +
                      e.what());
    }
  }
  std::map<std::string, std::size_t> index;
  for (const auto& line : read_lines(root / kPredictionsFile)) {
    const json j = json::parse(line);
    const auto variant = j.at("variant").get<std::string>();
    auto it = index.find(variant);
    if (it == index.end()) {
      it = index.emplace(variant, predictions_.size()).first;
      predictions_.push_back(PredictionSet{variant, {}});
    }
    predictions_[it->second].verdicts[j.at("pair_id").get<std::string>()] =
        j.at("verdict").get<bool>();
  }

  // Replay. A torn final line (never acknowledged) is cut off.
  const fs::path log = root / kJudgmentsFile;
  if (!fs::exists(log)) write_file(log, "");
  std::string content;
  {
    std::ifstream in(log, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    content = ss.str();
  }
  const std::size_t keep = content.rfind('\n') == std::string::npos
                               ? 0
                               : content.rfind('\n') + 1;
  if (keep != content.size()) {
    content.resize(keep);
    fs::resize_file(log, keep);
  }
  std::istringstream in(content);
  std::string line;
  n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      apply(judgment_from_json(line));
    } catch (const std::exception& e) {
      throw DataError(log.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void AnnotationStore::require_annotator(const std::string& annotator) const {
  if (std::find(annotators_.begin(), annotators_.end(), annotator) ==
      annotators_.end()) {
    throw AnnotationError(404, "unknown_annotator",
                          "annotator '" + annotator + "' is not registered");
  }
}

void AnnotationStore::apply(const HumanJudgment& j) {
  auto it = tasks_.find(j.pair_id);
  if (it == tasks_.end()) {
    throw AnnotationError(404, "unknown_pair", "no task for pair '" + j.pair_id + "'");
  }
  auto& per_pair = judgments_[j.pair_id];
  per_pair[j.annotator_id] = j;
  it->second.judgments = static_cast<int>(per_pair.size());
}

std::optional<AnnotationTask> AnnotationStore::next_task(
    const std::string& annotator) const {
  std::lock_guard<std::mutex> lock(mu_);
  require_annotator(annotator);
  for (const auto& [id, t] : tasks_) {
    if (t.done()) continue;
    auto it = judgments_.find(id);
    if (it != judgments_.end() && it->second.count(annotator)) continue;
    return t;
  }
  return std::nullopt;
}

std::pair<std::size_t, std::size_t> AnnotationStore::progress(
    const std::string& annotator) const {
  std::lock_guard<std::mutex> lock(mu_);
  require_annotator(annotator);
  std::size_t judged = 0;
  for (const auto& [id, per_pair] : judgments_) judged += per_pair.count(annotator);
  return {judged, tasks_.size()};
}

AnnotationTask AnnotationStore::submit(HumanJudgment j) {
  std::lock_guard<std::mutex> lock(mu_);
  require_annotator(j.annotator_id);
  if (!tasks_.count(j.pair_id)) {
    throw AnnotationError(404, "unknown_pair", "no task for pair '" + j.pair_id + "'");
  }
  if (j.verdict && j.dimension) {
    throw AnnotationError(422, "invalid_judgment",
                          "a dimension may only accompany an Inconsistent verdict");
  }
  if (j.timestamp == 0) j.timestamp = now_ms();
  append_synced(fs::path(dir_) / kJudgmentsFile, judgment_to_json(j) + "\n");
  apply(j);
  return tasks_.at(j.pair_id);
}

std::optional<AnnotationTask> AnnotationStore::task(const std::string& pair_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = tasks_.find(pair_id);
  if (it == tasks_.end()) return std::nullopt;
  return it->second;
}

std::vector<AnnotationTask> AnnotationStore::tasks() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<AnnotationTask> out;
  for (const auto& [id, t] : tasks_) out.push_back(t);
  return out;
}

std::map<std::string, std::vector<HumanJudgment>> AnnotationStore::judgments() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::map<std::string, std::vector<HumanJudgment>> out;
  for (const auto& [id, per_pair] : judgments_) {
    for (const auto& [annotator, j] : per_pair) out[id].push_back(j);
  }
  return out;
}

AgreementReport AnnotationStore::report() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::map<std::string, std::vector<HumanJudgment>> done;
  for (const auto& [id, t] : tasks_) {
    if (!t.done()) continue;
    for (const auto& [annotator, j] : judgments_.at(id)) done[id].push_back(j);
  }
  if (done.empty()) {
    throw AnnotationError(409, "no_done_tasks", "no task has enough judgments yet");
  }
  const auto verdicts = consensus(done);
  AgreementReport report;
  report.done_tasks = done.size();
  for (const auto& set : predictions_) {
    std::map<std::string, bool> preds;
    for (const auto& [id, v] : verdicts) {
      auto it = set.verdicts.find(id);
      if (it == set.verdicts.end()) {
        throw DataError("variant " + set.variant + " has no prediction for " + id);
      }
      preds[id] = it->second;
    }
    report.rows.push_back({set.variant, agreement(preds, verdicts)});
  }
  return report;
}

void AnnotationStore::compact() {
  std::lock_guard<std::mutex> lock(mu_);
  std::string content;
  for (const auto& [id, per_pair] : judgments_) {
    for (const auto& [annotator, j] : per_pair) content += judgment_to_json(j) + "\n";
  }
  const fs::path log = fs::path(dir_) / kJudgmentsFile;
  const fs::path tmp = fs::path(dir_) / "judgments.jsonl.tmp";
  fs::remove(tmp);
  append_synced(tmp, content);
  fs::rename(tmp, log);
}

}  // namespace contextguard
