#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hitl/json.hpp"

namespace hitl {

// Carries the HTTP status a label-service failure maps to.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int http_status, std::string code, const std::string& message)
      : std::runtime_error(message), http_status_(http_status), code_(std::move(code)) {}

  int http_status() const { return http_status_; }
  const std::string& code() const { return code_; }

 private:
  int http_status_;
  std::string code_;
};

enum class SessionStatus { open, complete, cancelled };

std::string to_string(SessionStatus status);

struct LabelQuery {
  std::size_t index = 0;
  std::size_t stage = 0;
  std::size_t state = 0;
  std::size_t action = 0;
  std::string description;
  json feature = json::array();
  std::optional<int> answer;
};

struct AuditEntry {
  std::size_t index = 0;
  int level = 0;
  std::int64_t timestamp_ms = 0;
};

struct LabelSession {
  std::string id;
  int levels = 1;
  std::vector<LabelQuery> queries;
  SessionStatus status = SessionStatus::open;
  std::int64_t created_ms = 0;
  std::int64_t updated_ms = 0;
  std::vector<AuditEntry> audit;

  std::size_t answered() const;
};

// Session bookkeeping behind the HTTP endpoints. Every mutation is appended
// to <data_dir>/sessions.jsonl and replayed on construction.
class LabelStore {
 public:
  explicit LabelStore(std::optional<std::filesystem::path> data_dir = std::nullopt);

  // Body: {"levels": n, "queries": [{stage, state, action, description, feature}]}.
  std::string create_session(const json& body);
  json get_session(const std::string& id) const;
  json submit_answer(const std::string& id, std::size_t index, int level);
  json status(const std::string& id) const;
  json cancel(const std::string& id);

  std::size_t session_count() const;

 private:
  LabelSession& find(const std::string& id);
  const LabelSession& find(const std::string& id) const;
  void append(const json& event);
  void apply(const json& event);

  mutable std::mutex mutex_;
  std::map<std::string, LabelSession> sessions_;
  std::optional<std::filesystem::path> log_path_;
};

json session_to_json(const LabelSession& session);
json status_to_json(const LabelSession& session);

// JSON-over-HTTP front end for a LabelStore:
//   POST /sessions                 create a session
//   GET  /sessions/{id}            queries with pending/answered listing
//   POST /sessions/{id}/answers    {"index": i, "level": k}
//   GET  /sessions/{id}/status     status and progress counts
//   POST /sessions/{id}/cancel     cancel an open session
class LabelServer {
 public:
  explicit LabelServer(LabelStore& store);
  ~LabelServer();
  LabelServer(const LabelServer&) = delete;
  LabelServer& operator=(const LabelServer&) = delete;

  // Binds without serving; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called.
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hitl
