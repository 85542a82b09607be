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


#include <atomic>

#include "contextguard/annotation.hpp"
#include "httplib.h"
#include "json.hpp"

namespace contextguard {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message) {
  ordered_json body;
  body["code"] = code;
  body["message"] = message;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Runs fn and maps store and parse errors onto HTTP errors.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const AnnotationError& e) {
    send_error(res, e.status(), e.code(), e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, "bad_request", e.what());
  } catch (const std::invalid_argument& e) {
    send_error(res, 400, "bad_request", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

HumanJudgment parse_submission(const std::string& body) {
  const json o = json::parse(body);
  if (!o.is_object()) throw std::invalid_argument("body must be a JSON object");
  for (const char* key : {"pair_id", "annotator", "verdict"}) {
    if (!o.contains(key)) {
      throw std::invalid_argument(std::string("missing field '") + key + "'");
    }
  }
  if (!o.at("verdict").is_boolean()) {
    throw std::invalid_argument("'verdict' must be a boolean");
  }
  HumanJudgment j;
  j.pair_id = o.at("pair_id").get<std::string>();
  j.annotator_id = o.at("annotator").get<std::string>();
  j.verdict = o.at("verdict").get<bool>();
  if (o.contains("dimension") && !o.at("dimension").is_null()) {
    try {
      j.dimension = parse_dimension(o.at("dimension").get<std::string>());
    } catch (const DataError& e) {
      throw std::invalid_argument(e.what());
    }
  }
  return j;
}

}  // namespace

struct AnnotationServer::Impl {
  AnnotationStore& store;
  httplib::Server server;
  std::atomic<bool> bound{false};
  explicit Impl(AnnotationStore& s) : store(s) {}
};

AnnotationServer::AnnotationServer(AnnotationStore& store,
                                   const std::string& static_dir)
    : impl_(std::make_unique<Impl>(store)) {
  auto& srv = impl_->server;
  AnnotationStore* st = &store;

  srv.Get("/api/tasks/next", [st](const httplib::Request& req,
                                  httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("annotator") || req.get_param_value("annotator").empty()) {
        send_error(res, 400, "bad_request", "query parameter 'annotator' is required");
        return;
      }
      const std::string annotator = req.get_param_value("annotator");
      const auto task = st->next_task(annotator);
      if (!task) {
        res.status = 204;
        return;
      }
      const auto [judged, total] = st->progress(annotator);
      ordered_json body = ordered_json::parse(task_to_json(*task));
      body["progress"] = {{"judged", judged}, {"total", total}};
      res.status = 200;
      res.set_content(body.dump(), "application/json");
    });
  });

  srv.Post("/api/judgments", [st](const httplib::Request& req,
                                  httplib::Response& res) {
    guarded(res, [&] {
      const auto task = st->submit(parse_submission(req.body));
      res.status = 201;
      res.set_content(task_to_json(task), "application/json");
    });
  });

  srv.Get("/api/report", [st](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      res.status = 200;
      res.set_content(report_to_json(st->report()), "application/json");
    });
  });

  srv.Get(R"(/api/pairs/([^/]+))", [st](const httplib::Request& req,
                                        httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      const auto task = st->task(id);
      if (!task) {
        send_error(res, 404, "unknown_pair", "no task for pair '" + id + "'");
        return;
      }
      res.status = 200;
      res.set_content(task_to_json(*task), "application/json");
    });
  });

  if (!static_dir.empty() && !srv.set_mount_point("/", static_dir)) {
    throw ConfigError("static directory not found: " + static_dir);
  }
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind(const std::string& host, int port) {
  int bound = -1;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (impl_->server.bind_to_port(host, port)) {
    bound = port;
  }
  impl_->bound = bound > 0;
  return bound > 0 ? bound : -1;
}

void AnnotationServer::listen() {
  if (!impl_->bound) throw std::logic_error("AnnotationServer::listen before bind");
  impl_->server.listen_after_bind();
}

void AnnotationServer::stop() { impl_->server.stop(); }

}  // namespace contextguard
