#include "hitl/label_service.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include <httplib.h>

#include "hitl/errors.hpp"

namespace hitl {

namespace {

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string session_id(std::size_t ordinal) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06zu", ordinal);
  return buf;
}

}  // namespace

std::string to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::open:
      return "open";
    case SessionStatus::complete:
      return "complete";
    case SessionStatus::cancelled:
      return "cancelled";
  }
  return "open";
}

std::size_t LabelSession::answered() const {
  std::size_t n = 0;
  for (const auto& q : queries) n += q.answer.has_value() ? 1 : 0;
  return n;
}

json session_to_json(const LabelSession& session) {
  json queries = json::array();
  json pending = json::array();
  json answered = json::array();
  for (const auto& q : session.queries) {
    queries.push_back({{"index", q.index},
                       {"stage", q.stage},
                       {"state", q.state},
                       {"action", q.action},
                       {"description", q.description},
                       {"feature", q.feature},
                       {"answer", q.answer ? json(*q.answer) : json(nullptr)}});
    (q.answer ? answered : pending).push_back(q.index);
  }
  json audit = json::array();
  for (const auto& a : session.audit) {
    audit.push_back({{"index", a.index}, {"level", a.level}, {"timestamp", a.timestamp_ms}});
  }
  return {{"id", session.id},
          {"levels", session.levels},
          {"status", to_string(session.status)},
          {"created", session.created_ms},
          {"updated", session.updated_ms},
          {"queries", std::move(queries)},
          {"pending", std::move(pending)},
          {"answered", std::move(answered)},
          {"audit", std::move(audit)}};
}

json status_to_json(const LabelSession& session) {
  return {{"id", session.id},
          {"status", to_string(session.status)},
          {"answered", session.answered()},
          {"total", session.queries.size()},
          {"levels", session.levels},
          {"updated", session.updated_ms}};
}

LabelStore::LabelStore(std::optional<std::filesystem::path> data_dir) {
  if (!data_dir) return;
  std::filesystem::create_directories(*data_dir);
  log_path_ = *data_dir / "sessions.jsonl";
  std::ifstream in(*log_path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // A torn final line from an interrupted write is ignored.
    json event = json::parse(line, nullptr, false);
    if (event.is_discarded()) continue;
    apply(event);
  }
}

void LabelStore::append(const json& event) {
  if (!log_path_) return;
  std::ofstream out(*log_path_, std::ios::app);
  out << event.dump() << '\n';
  out.flush();
  if (!out) throw ServiceError(500, "persistence_error", "failed to append to session log");
}

// Replays (or performs) one logged mutation. Callers validate first.
void LabelStore::apply(const json& event) {
  const auto kind = event.at("event").get<std::string>();
  const auto id = event.at("id").get<std::string>();
  const auto ts = event.at("timestamp").get<std::int64_t>();
  if (kind == "create") {
    LabelSession s;
    s.id = id;
    s.levels = event.at("levels").get<int>();
    s.created_ms = s.updated_ms = ts;
    for (const auto& q : event.at("queries")) {
      LabelQuery lq;
      lq.index = s.queries.size();
      lq.stage = q.value("stage", std::size_t{0});
      lq.state = q.value("state", std::size_t{0});
      lq.action = q.value("action", std::size_t{0});
      lq.description = q.value("description", "");
      lq.feature = q.value("feature", json::array());
      s.queries.push_back(std::move(lq));
    }
    if (s.queries.empty()) s.status = SessionStatus::complete;
    sessions_[id] = std::move(s);
  } else if (kind == "answer") {
    auto& s = sessions_.at(id);
    const auto index = event.at("index").get<std::size_t>();
    const int level = event.at("level").get<int>();
    s.queries.at(index).answer = level;
    s.audit.push_back({index, level, ts});
    s.updated_ms = ts;
    if (s.answered() == s.queries.size()) s.status = SessionStatus::complete;
  } else if (kind == "cancel") {
    auto& s = sessions_.at(id);
    s.status = SessionStatus::cancelled;
    s.updated_ms = ts;
  }
}

LabelSession& LabelStore::find(const std::string& id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "not_found", "unknown session " + id);
  return it->second;
}

const LabelSession& LabelStore::find(const std::string& id) const {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "not_found", "unknown session " + id);
  return it->second;
}

std::string LabelStore::create_session(const json& body) {
  if (!body.is_object() || !body.contains("queries") || !body.at("queries").is_array()) {
    throw ServiceError(400, "validation_error", "body needs a queries array");
  }
  const int levels = body.value("levels", 1);
  if (levels < 1) throw ServiceError(400, "validation_error", "levels must be >= 1");
  json queries = json::array();
  for (const auto& q : body.at("queries")) {
    if (!q.is_object()) throw ServiceError(400, "validation_error", "queries must be objects");
    json clean{{"stage", q.value("stage", std::size_t{0})},
               {"state", q.value("state", std::size_t{0})},
               {"action", q.value("action", std::size_t{0})},
               {"description", q.value("description", "")},
               {"feature", q.value("feature", json::array())}};
    queries.push_back(std::move(clean));
  }
  std::lock_guard lock(mutex_);
  const auto id = session_id(sessions_.size() + 1);
  json event{{"event", "create"},
             {"id", id},
             {"levels", levels},
             {"queries", std::move(queries)},
             {"timestamp", now_ms()}};
  append(event);
  apply(event);
  return id;
}

json LabelStore::get_session(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return session_to_json(find(id));
}

json LabelStore::status(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return status_to_json(find(id));
}

json LabelStore::submit_answer(const std::string& id, std::size_t index, int level) {
  std::lock_guard lock(mutex_);
  auto& s = find(id);
  if (s.status != SessionStatus::open) {
    throw ServiceError(409, "conflict", "session " + id + " is " + to_string(s.status));
  }
  if (index >= s.queries.size()) {
    throw ServiceError(400, "validation_error", "index " + std::to_string(index) +
                                                    " outside session of " +
                                                    std::to_string(s.queries.size()));
  }
  if (level < 0 || level > s.levels) {
    throw ServiceError(400, "validation_error",
                       "level must lie in 0.." + std::to_string(s.levels));
  }
  json event{{"event", "answer"},
             {"id", id},
             {"index", index},
             {"level", level},
             {"timestamp", now_ms()}};
  append(event);
  apply(event);
  json ack = status_to_json(s);
  ack["index"] = index;
  ack["level"] = level;
  return ack;
}

json LabelStore::cancel(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto& s = find(id);
  if (s.status != SessionStatus::open) {
    throw ServiceError(409, "conflict", "session " + id + " is " + to_string(s.status));
  }
  json event{{"event", "cancel"}, {"id", id}, {"timestamp", now_ms()}};
  append(event);
  apply(event);
  return status_to_json(s);
}

std::size_t LabelStore::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

struct LabelServer::Impl {
  explicit Impl(LabelStore& s) : store(s) {}
  LabelStore& store;
  httplib::Server server;
};

namespace {

template <class Handler>
void respond(httplib::Response& res, int ok_status, Handler&& handler) {
  try {
    res.set_content(handler().dump(), "application/json");
    res.status = ok_status;
  } catch (const ServiceError& e) {
    res.status = e.http_status();
    res.set_content(json{{"error", e.code()}, {"message", e.what()}}.dump(), "application/json");
  } catch (const json::exception& e) {
    res.status = 400;
    res.set_content(json{{"error", "validation_error"}, {"message", e.what()}}.dump(),
                    "application/json");
  }
}

}  // namespace

LabelServer::LabelServer(LabelStore& store) : impl_(std::make_unique<Impl>(store)) {
  auto& srv = impl_->server;
  auto& st = impl_->store;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  srv.Post("/sessions", [&st](const httplib::Request& req, httplib::Response& res) {
    respond(res, 201, [&] {
      const auto id = st.create_session(json::parse(req.body));
      return st.status(id);
    });
  });
  srv.Get(R"(/sessions/([^/]+))", [&st](const httplib::Request& req, httplib::Response& res) {
    respond(res, 200, [&] { return st.get_session(req.matches[1]); });
  });
  srv.Get(R"(/sessions/([^/]+)/status)",
          [&st](const httplib::Request& req, httplib::Response& res) {
            respond(res, 200, [&] { return st.status(req.matches[1]); });
          });
  srv.Post(R"(/sessions/([^/]+)/answers)",
           [&st](const httplib::Request& req, httplib::Response& res) {
             respond(res, 200, [&] {
               const auto body = json::parse(req.body);
               const auto index = body.at("index").get<long long>();
               if (index < 0) throw ServiceError(400, "validation_error", "negative index");
               return st.submit_answer(req.matches[1], static_cast<std::size_t>(index),
                                       body.at("level").get<int>());
             });
           });
  srv.Post(R"(/sessions/([^/]+)/cancel)",
           [&st](const httplib::Request& req, httplib::Response& res) {
             respond(res, 200, [&] { return st.cancel(req.matches[1]); });
           });
}

LabelServer::~LabelServer() { stop(); }

int LabelServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw OracleError("cannot bind label service on " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw OracleError("cannot bind label service on " + host + ":" + std::to_string(port));
  }
  return port;
}

void LabelServer::serve() { impl_->server.listen_after_bind(); }

void LabelServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace hitl
