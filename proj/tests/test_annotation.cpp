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
#include <random>
#include <thread>

#include <unistd.h>

#include "contextguard/annotation.hpp"
#include "httplib.h"
#include "json.hpp"
#include "test_util.hpp"

namespace contextguard {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::small_corpus;
using testing::small_world;

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() /
              ("cg_" + tag + "_" + std::to_string(::getpid()) + "_" +
               std::to_string(counter_++))) {
    fs::remove_all(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string str() const { return path_.string(); }
  fs::path path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

AnnotationTask make_task(const std::string& id, int required = 5) {
  AnnotationTask t;
  t.pair_id = id;
  t.display_text = "text of " + id;
  t.scene_summary = "scene of " + id;
  t.required_judgments = required;
  return t;
}

HumanJudgment vote(const std::string& pair, const std::string& who, bool verdict,
                   std::optional<ContextDimension> dim = std::nullopt) {
  HumanJudgment j;
  j.pair_id = pair;
  j.annotator_id = who;
  j.verdict = verdict;
  j.dimension = dim;
  j.timestamp = 1000;
  return j;
}

const std::vector<std::string> kAnnotators = {"a1", "a2", "a3", "a4", "a5"};

std::vector<PredictionSet> predictions(const std::vector<std::string>& ids) {
  PredictionSet yes{"full", {}}, no{"baseline", {}};
  for (const auto& id : ids) {
    yes.verdicts[id] = true;
    no.verdicts[id] = false;
  }
  return {yes, no};
}

// --- selection ---------------------------------------------------------------

TEST(SelectChallenging, MatchesFilterOracle) {
  const auto world = small_world();
  const Corpus c = small_corpus(world, 60, 60, 4);
  std::mt19937_64 rng(3);
  PredictionSet full{"full", {}};
  std::vector<PredictionSet> baselines = {{"b1", {}}, {"b2", {}}};
  for (const auto& r : c.records) {
    full.verdicts[r.id] = rng() % 4 ? r.overall_consistent : !r.overall_consistent;
    for (auto& b : baselines) b.verdicts[r.id] = rng() % 2;
  }
  std::vector<std::string> expected;
  for (const auto& r : c.records) {
    const bool t = r.overall_consistent;
    if (full.verdicts[r.id] == t && baselines[0].verdicts[r.id] != t &&
        baselines[1].verdicts[r.id] != t) {
      expected.push_back(r.id);
    }
  }
  std::sort(expected.begin(), expected.end());
  const auto sel = select_challenging(c.records, full, baselines, 200, world);
  std::vector<std::string> got;
  for (const auto& t : sel.tasks) got.push_back(t.pair_id);
  EXPECT_EQ(got, expected);
  EXPECT_EQ(sel.qualifying, expected.size());
  EXPECT_TRUE(sel.warning);
  const auto capped = select_challenging(c.records, full, baselines, 5, world);
  ASSERT_EQ(capped.tasks.size(), 5u);
  EXPECT_EQ(capped.tasks[4].pair_id, expected[4]);
  EXPECT_FALSE(capped.warning);
}

TEST(SelectChallenging, ExhaustionAndEmptyCases) {
  const auto world = small_world();
  const Corpus c = small_corpus(world, 10, 10, 2);
  PredictionSet full{"full", {}}, base{"base", {}};
  for (const auto& r : c.records) {
    full.verdicts[r.id] = r.overall_consistent;
    base.verdicts[r.id] = r.overall_consistent;
  }
  EXPECT_TRUE(select_challenging(c.records, full, {base}, 200, world).tasks.empty());
  for (int i : {1, 7, 13}) base.verdicts[c.records[i].id] = !c.records[i].overall_consistent;
  const auto sel = select_challenging(c.records, full, {base}, 200, world);
  EXPECT_EQ(sel.tasks.size(), 3u);
  EXPECT_TRUE(sel.warning);
  EXPECT_FALSE(sel.tasks[0].display_text.empty());
  EXPECT_THROW(select_challenging(c.records, full, {}, 200, world), std::invalid_argument);
}

// --- store -------------------------------------------------------------------

class StoreTest : public ::testing::Test {
 protected:
  void SetUp() override {
    AnnotationStore::create(dir.str(), {make_task("p3"), make_task("p1"), make_task("p2")},
                            predictions({"p1", "p2", "p3"}), kAnnotators);
  }
  TempDir dir{"store"};
};

TEST_F(StoreTest, NextTaskOrderingAndExhaustion) {
  AnnotationStore s(dir.str());
  EXPECT_EQ(s.next_task("a1")->pair_id, "p1");
  s.submit(vote("p1", "a1", true));
  EXPECT_EQ(s.next_task("a1")->pair_id, "p2");
  EXPECT_EQ(s.next_task("a2")->pair_id, "p1");
  s.submit(vote("p2", "a1", true));
  s.submit(vote("p3", "a1", false, ContextDimension::kNarrative));
  EXPECT_FALSE(s.next_task("a1").has_value());
  EXPECT_EQ(s.progress("a1"), (std::pair<std::size_t, std::size_t>{3, 3}));
  EXPECT_THROW(s.next_task("zz"), AnnotationError);
}

TEST_F(StoreTest, InterleavedAnnotatorsNeverSeeJudgedTasks) {
  AnnotationStore s(dir.str());
  std::mt19937_64 rng(1);
  std::map<std::string, std::set<std::string>> seen;
  for (int step = 0; step < 100; ++step) {
    const std::string who = kAnnotators[rng() % 2];
    const auto t = s.next_task(who);
    if (!t) continue;
    EXPECT_FALSE(seen[who].count(t->pair_id));
    seen[who].insert(t->pair_id);
    s.submit(vote(t->pair_id, who, rng() % 2));
  }
  EXPECT_EQ(seen["a1"].size(), 3u);
  EXPECT_EQ(seen["a2"].size(), 3u);
}

TEST_F(StoreTest, FifthJudgmentCompletesTaskAndResubmissionReplaces) {
  AnnotationStore s(dir.str());
  for (int i = 0; i < 4; ++i) EXPECT_FALSE(s.submit(vote("p1", kAnnotators[i], true)).done());
  EXPECT_EQ(s.submit(vote("p1", "a1", false)).judgments, 4);
  EXPECT_FALSE(s.judgments().at("p1")[0].verdict);
  const auto t = s.submit(vote("p1", "a5", true));
  EXPECT_TRUE(t.done());
  EXPECT_EQ(t.judgments, 5);
  // Done tasks are no longer handed out, even to annotators who skipped it.
  s.submit(vote("p1", "a5", false));
  EXPECT_TRUE(s.task("p1")->done());
}

TEST_F(StoreTest, SubmissionErrors) {
  AnnotationStore s(dir.str());
  try {
    s.submit(vote("p1", "nobody", true));
    FAIL();
  } catch (const AnnotationError& e) {
    EXPECT_EQ(e.status(), 404);
    EXPECT_EQ(e.code(), "unknown_annotator");
  }
  try {
    s.submit(vote("nope", "a1", true));
    FAIL();
  } catch (const AnnotationError& e) {
    EXPECT_EQ(e.status(), 404);
    EXPECT_EQ(e.code(), "unknown_pair");
  }
  try {
    s.submit(vote("p1", "a1", true, ContextDimension::kSentiment));
    FAIL();
  } catch (const AnnotationError& e) {
    EXPECT_EQ(e.status(), 422);
    EXPECT_EQ(e.code(), "invalid_judgment");
  }
  EXPECT_TRUE(s.judgments().empty());
}

TEST_F(StoreTest, SurvivesRestartWithIdenticalContents) {
  std::map<std::string, std::vector<HumanJudgment>> before;
  {
    AnnotationStore s(dir.str());
    s.submit(vote("p1", "a1", true));
    s.submit(vote("p2", "a3", false, ContextDimension::kBackground));
    s.submit(vote("p1", "a1", false));
    before = s.judgments();
  }
  AnnotationStore reopened(dir.str());
  const auto after = reopened.judgments();
  ASSERT_EQ(after.size(), before.size());
  for (const auto& [id, js] : before) {
    ASSERT_EQ(after.at(id).size(), js.size());
    for (std::size_t i = 0; i < js.size(); ++i) {
      EXPECT_EQ(judgment_to_json(after.at(id)[i]), judgment_to_json(js[i]));
    }
  }
  EXPECT_EQ(reopened.task("p1")->judgments, 1);
}

TEST_F(StoreTest, TornFinalLineIsDropped) {
  {
    AnnotationStore s(dir.str());
    s.submit(vote("p1", "a1", true));
  }
  {
    std::ofstream out(dir.path() / "judgments.jsonl", std::ios::app);
    out << R"({"pair_id":"p2","annot)";
  }
  AnnotationStore s(dir.str());
  EXPECT_EQ(s.judgments().size(), 1u);
  s.submit(vote("p2", "a2", true));
  AnnotationStore again(dir.str());
  EXPECT_EQ(again.task("p2")->judgments, 1);
}

TEST_F(StoreTest, CompactionKeepsOneLinePerJudgment) {
  AnnotationStore s(dir.str());
  for (int i = 0; i < 5; ++i) s.submit(vote("p1", "a1", i % 2 == 0));
  s.submit(vote("p2", "a2", true));
  const auto before = s.judgments();
  s.compact();
  std::ifstream in(dir.path() / "judgments.jsonl");
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 2);
  AnnotationStore reopened(dir.str());
  EXPECT_EQ(reopened.judgments().at("p1")[0].verdict, before.at("p1")[0].verdict);
}

TEST_F(StoreTest, ReportNeedsDoneTasks) {
  AnnotationStore s(dir.str());
  try {
    s.report();
    FAIL();
  } catch (const AnnotationError& e) {
    EXPECT_EQ(e.status(), 409);
  }
}

TEST_F(StoreTest, ReportOverDoneTasksOnly) {
  AnnotationStore s(dir.str());
  for (int i = 0; i < 5; ++i) s.submit(vote("p1", kAnnotators[i], i < 3));
  // Open task with an opposite majority so far: must not count.
  for (int i = 0; i < 4; ++i) s.submit(vote("p2", kAnnotators[i], false));
  const auto rep = s.report();
  EXPECT_EQ(rep.done_tasks, 1u);
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(rep.rows[0].variant, "full");
  EXPECT_EQ(rep.rows[0].agreement, 100.0);
  EXPECT_EQ(rep.rows[1].agreement, 0.0);
}

// Report recomputed from the raw files with no store code involved.
TEST_F(StoreTest, ReportMatchesRawFileRecomputation) {
  AnnotationStore s(dir.str());
  std::mt19937_64 rng(7);
  for (const auto& p : {"p1", "p2", "p3"}) {
    for (const auto& a : kAnnotators) {
      if (rng() % 5 == 0 && std::string(p) != "p1") continue;
      s.submit(vote(p, a, rng() % 2));
      if (rng() % 3 == 0) s.submit(vote(p, a, rng() % 2));
    }
  }
  std::map<std::string, std::map<std::string, bool>> last;
  std::ifstream in(dir.path() / "judgments.jsonl");
  for (std::string l; std::getline(in, l);) {
    const json j = json::parse(l);
    last[j["pair_id"]][j["annotator"]] = j["verdict"].get<bool>();
  }
  std::map<std::string, bool> cons;
  for (const auto& [pair, votes] : last) {
    if (votes.size() < 5) continue;
    int yes = 0;
    for (const auto& [a, v] : votes) yes += v;
    cons[pair] = 2 * yes > static_cast<int>(votes.size());
  }
  std::map<std::string, std::map<std::string, bool>> preds;
  std::ifstream pin(dir.path() / "predictions.jsonl");
  for (std::string l; std::getline(pin, l);) {
    const json j = json::parse(l);
    preds[j["variant"]][j["pair_id"]] = j["verdict"].get<bool>();
  }
  const auto rep = s.report();
  EXPECT_EQ(rep.done_tasks, cons.size());
  for (const auto& row : rep.rows) {
    int same = 0;
    for (const auto& [pair, v] : cons) same += preds[row.variant][pair] == v;
    EXPECT_DOUBLE_EQ(row.agreement, 100.0 * same / static_cast<double>(cons.size()));
  }
}

TEST(StoreScope, AddingAnOpenTaskLeavesReportUnchanged) {
  TempDir a("scope_a"), b("scope_b");
  auto preds = predictions({"p1", "p2", "p9"});
  AnnotationStore::create(a.str(), {make_task("p1"), make_task("p2")}, preds, kAnnotators);
  AnnotationStore::create(b.str(), {make_task("p1"), make_task("p2"), make_task("p9")}, preds,
                          kAnnotators);
  AnnotationStore sa(a.str()), sb(b.str());
  for (auto* s : {&sa, &sb}) {
    for (int i = 0; i < 5; ++i) s->submit(vote("p1", kAnnotators[i], i % 2 == 0));
    s->submit(vote("p2", "a1", true));
  }
  sb.submit(vote("p9", "a2", false));
  EXPECT_EQ(report_to_json(sa.report()), report_to_json(sb.report()));
}

// --- HTTP API ----------------------------------------------------------------

class ApiTest : public ::testing::Test {
 protected:
  void SetUp() override {
    AnnotationStore::create(dir.str(), {make_task("p1", 2), make_task("p2", 2)},
                            predictions({"p1", "p2"}), {"a1", "a2"});
    store = std::make_unique<AnnotationStore>(dir.str());
    server = std::make_unique<AnnotationServer>(*store);
    port = server->bind("127.0.0.1", 0);
    ASSERT_GT(port, 0);
    thread = std::thread([this] { server->listen(); });
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }
  void TearDown() override {
    server->stop();
    thread.join();
  }
  httplib::Result post(const json& body) {
    return client->Post("/api/judgments", body.dump(), "application/json");
  }

  TempDir dir{"api"};
  std::unique_ptr<AnnotationStore> store;
  std::unique_ptr<AnnotationServer> server;
  std::unique_ptr<httplib::Client> client;
  std::thread thread;
  int port = 0;
};

TEST_F(ApiTest, NextTaskFlow) {
  auto res = client->Get("/api/tasks/next?annotator=a1");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const json body = json::parse(res->body);
  EXPECT_EQ(body["pair_id"], "p1");
  EXPECT_EQ(body["status"], "open");
  EXPECT_EQ(body["progress"]["judged"], 0);
  EXPECT_EQ(body["progress"]["total"], 2);
  EXPECT_TRUE(body.contains("scene_summary"));
  EXPECT_EQ(client->Get("/api/tasks/next")->status, 400);
  EXPECT_EQ(client->Get("/api/tasks/next?annotator=zz")->status, 404);
}

TEST_F(ApiTest, SubmitAndExhaust) {
  auto res = post({{"pair_id", "p1"}, {"annotator", "a1"}, {"verdict", true}});
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  EXPECT_EQ(json::parse(res->body)["judgments"], 1);
  res = post({{"pair_id", "p2"}, {"annotator", "a1"}, {"verdict", false}, {"dimension", "Sentiment"}});
  EXPECT_EQ(res->status, 201);
  EXPECT_EQ(client->Get("/api/tasks/next?annotator=a1")->status, 204);
  const json pair = json::parse(client->Get("/api/pairs/p2")->body);
  EXPECT_EQ(pair["judgments"], 1);
  EXPECT_EQ(client->Get("/api/pairs/nope")->status, 404);
}

TEST_F(ApiTest, RejectsMalformedSubmissions) {
  const auto code = [](const httplib::Result& r) { return json::parse(r->body)["code"]; };
  auto res = client->Post("/api/judgments", "{not json", "application/json");
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(code(res), "bad_request");
  EXPECT_EQ(post({{"pair_id", "p1"}, {"annotator", "a1"}})->status, 400);
  EXPECT_EQ(post({{"pair_id", "p1"}, {"annotator", "a1"}, {"verdict", "yes"}})->status, 400);
  EXPECT_EQ(post({{"pair_id", "p1"}, {"annotator", "a1"}, {"verdict", false},
                  {"dimension", "Colour"}})->status, 400);
  res = post({{"pair_id", "p1"}, {"annotator", "a1"}, {"verdict", true}, {"dimension", "Sentiment"}});
  EXPECT_EQ(res->status, 422);
  EXPECT_EQ(code(res), "invalid_judgment");
  res = post({{"pair_id", "p7"}, {"annotator", "a1"}, {"verdict", true}});
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(code(res), "unknown_pair");
  res = post({{"pair_id", "p1"}, {"annotator", "x"}, {"verdict", true}});
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(code(res), "unknown_annotator");
}

TEST_F(ApiTest, ReportLifecycle) {
  auto res = client->Get("/api/report");
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(json::parse(res->body)["code"], "no_done_tasks");
  post({{"pair_id", "p1"}, {"annotator", "a1"}, {"verdict", true}});
  post({{"pair_id", "p1"}, {"annotator", "a2"}, {"verdict", true}});
  res = client->Get("/api/report");
  ASSERT_EQ(res->status, 200);
  const json rep = json::parse(res->body);
  EXPECT_EQ(rep["done_tasks"], 1);
  EXPECT_EQ(rep["rows"][0]["variant"], "full");
  EXPECT_EQ(rep["rows"][0]["agreement"], 100.0);
  EXPECT_EQ(rep["rows"][1]["agreement"], 0.0);
  EXPECT_EQ(json::parse(client->Get("/api/pairs/p1")->body)["status"], "done");
}

}  // namespace
}  // namespace contextguard
