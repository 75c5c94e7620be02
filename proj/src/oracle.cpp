#include "hitl/oracle.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <thread>

#include <httplib.h>

#include "hitl/errors.hpp"

namespace hitl {

namespace {

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

FeedbackOracle::FeedbackOracle(int levels) : levels_(levels) {
  if (levels < 1) throw DataError("oracle needs at least one reward level");
}

int FeedbackOracle::checked(int label) const {
  if (label < 0 || label > levels_) {
    throw OracleError("oracle returned label level " + std::to_string(label) +
                      " outside 0.." + std::to_string(levels_));
  }
  return label;
}

int FeedbackOracle::ask(const Query& query) {
  const int label = checked(answer(query));
  calls_.fetch_add(1);
  return label;
}

std::vector<int> FeedbackOracle::ask_batch(const std::vector<Query>& queries) {
  auto labels = answer_batch(queries);
  if (labels.size() != queries.size()) {
    throw OracleError("oracle answered " + std::to_string(labels.size()) + " of " +
                      std::to_string(queries.size()) + " queries");
  }
  for (int& l : labels) l = checked(l);
  calls_.fetch_add(labels.size());
  return labels;
}

std::vector<int> FeedbackOracle::answer_batch(const std::vector<Query>& queries) {
  std::vector<int> labels;
  labels.reserve(queries.size());
  for (const auto& q : queries) labels.push_back(answer(q));
  return labels;
}

Eigen::VectorXd two_point_spec(double f, int levels) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(levels + 1);
  const double x = std::clamp(f, 0.0, 1.0) * levels;
  const double lower = std::floor(x);
  const auto lo = static_cast<Eigen::Index>(lower);
  if (lo >= levels) {
    p[levels] = 1.0;
    return p;
  }
  const double upper_mass = x - lower;
  p[lo] = 1.0 - upper_mass;
  p[lo + 1] += upper_mass;
  return p;
}

SimulatedOracle::SimulatedOracle(ResponseModel model, int levels, std::uint64_t seed,
                                 ResponseSpec spec)
    : FeedbackOracle(levels), model_(std::move(model)), spec_(std::move(spec)), rng_(seed) {}

int SimulatedOracle::answer(const Query& query) {
  if (query.stage >= model_.weights.size()) throw OracleError("query stage outside the model");
  const double f = model_(query.stage, query.feature);
  const Eigen::VectorXd p = spec_(f, levels());
  if (p.size() != levels() + 1 || (p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-9) {
    throw DataError("response spec did not return a probability vector");
  }
  const double mean = p.dot(Eigen::VectorXd::LinSpaced(levels() + 1, 0.0, 1.0));
  if (std::abs(mean - f) > 1e-9) throw DataError("response spec mean differs from f*");
  std::lock_guard lock(mutex_);
  return static_cast<int>(sample_index(p, rng_));
}

void to_json(json& j, const TranscriptRecord& record) {
  j = json{{"index", record.index},
           {"stage", record.stage},
           {"state", record.state},
           {"action", record.action},
           {"feature", vector_to_json(record.feature)},
           {"label", static_cast<double>(record.level) / record.levels},
           {"levels", record.levels},
           {"timestamp", record.timestamp_ms}};
}

TranscriptRecord transcript_record_from_json(const json& j) {
  try {
    TranscriptRecord r;
    r.index = j.at("index").get<std::size_t>();
    r.stage = j.at("stage").get<std::size_t>();
    r.state = j.at("state").get<std::size_t>();
    r.action = j.at("action").get<std::size_t>();
    r.feature = vector_from_json(j.at("feature"));
    r.levels = j.value("levels", 1);
    r.level = static_cast<int>(std::lround(j.at("label").get<double>() * r.levels));
    r.timestamp_ms = j.value("timestamp", std::int64_t{0});
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed transcript record: ") + e.what());
  }
}

std::vector<TranscriptRecord> read_transcript(std::istream& in) {
  std::vector<TranscriptRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(transcript_record_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw DataError(std::string("malformed transcript line: ") + e.what());
    }
  }
  return out;
}

std::vector<TranscriptRecord> read_transcript(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open transcript " + path);
  return read_transcript(in);
}

ScriptedOracle::ScriptedOracle(std::vector<TranscriptRecord> transcript, int levels)
    : FeedbackOracle(levels), transcript_(std::move(transcript)) {}

int ScriptedOracle::answer(const Query& query) {
  std::lock_guard lock(mutex_);
  if (cursor_ >= transcript_.size()) {
    throw OracleError("transcript exhausted at query " + std::to_string(cursor_));
  }
  const auto& rec = transcript_[cursor_];
  if (rec.stage != query.stage || rec.state != query.state || rec.action != query.action) {
    throw OracleError("query " + std::to_string(cursor_) + " (stage " +
                      std::to_string(query.stage) + ", state " + std::to_string(query.state) +
                      ", action " + std::to_string(query.action) +
                      ") does not match the transcript");
  }
  if (rec.levels != levels()) throw OracleError("transcript level count differs from oracle");
  ++cursor_;
  return rec.level;
}

RecordingOracle::RecordingOracle(FeedbackOracle& inner, std::ostream& out)
    : FeedbackOracle(inner.levels()), inner_(inner), out_(out) {}

void RecordingOracle::record(const Query& query, int level) {
  TranscriptRecord rec{records_.size(), query.stage,  query.state, query.action,
                       query.feature,   level,        levels(),    now_ms()};
  out_ << json(rec).dump() << '\n';
  out_.flush();
  records_.push_back(std::move(rec));
}

int RecordingOracle::answer(const Query& query) {
  const int level = inner_.ask(query);
  std::lock_guard lock(mutex_);
  record(query, level);
  return level;
}

std::vector<int> RecordingOracle::answer_batch(const std::vector<Query>& queries) {
  auto labels = inner_.ask_batch(queries);
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < queries.size(); ++i) record(queries[i], labels[i]);
  return labels;
}

RemoteOracle::RemoteOracle(RemoteOracleConfig config, int levels)
    : FeedbackOracle(levels), config_(std::move(config)) {}

int RemoteOracle::answer(const Query& query) { return answer_batch({query}).front(); }

std::vector<int> RemoteOracle::answer_batch(const std::vector<Query>& queries) {
  if (queries.empty()) return {};
  httplib::Client client(config_.host, config_.port);
  client.set_connection_timeout(5);

  json body{{"levels", levels()}, {"queries", json::array()}};
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    body["queries"].push_back({{"stage", q.stage},
                               {"state", q.state},
                               {"action", q.action},
                               {"description", q.description},
                               {"feature", vector_to_json(q.feature)}});
  }
  std::string id;
  if (config_.resume_session && sessions_.empty()) {
    id = *config_.resume_session;
    auto existing = client.Get("/sessions/" + id);
    if (!existing) throw OracleError("label service unreachable at " + config_.host + ":" +
                                     std::to_string(config_.port));
    if (existing->status != 200) throw OracleError("cannot resume session " + id);
    const auto listed = json::parse(existing->body).at("queries");
    if (listed.size() != queries.size()) {
      throw OracleError("session " + id + " holds " + std::to_string(listed.size()) +
                        " queries, expected " + std::to_string(queries.size()));
    }
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto& q = listed[i];
      if (q.at("stage").get<std::size_t>() != queries[i].stage ||
          q.at("state").get<std::size_t>() != queries[i].state ||
          q.at("action").get<std::size_t>() != queries[i].action) {
        throw OracleError("session " + id + " query " + std::to_string(i) +
                          " does not match the batch");
      }
    }
  } else {
    auto created = client.Post("/sessions", body.dump(), "application/json");
    if (!created) throw OracleError("label service unreachable at " + config_.host + ":" +
                                    std::to_string(config_.port));
    if (created->status != 201) {
      throw OracleError("label service rejected the batch (HTTP " +
                        std::to_string(created->status) + ")");
    }
    id = json::parse(created->body).at("id").get<std::string>();
  }
  sessions_.push_back(id);

  const auto deadline = std::chrono::steady_clock::now() + config_.timeout;
  while (true) {
    auto status = client.Get("/sessions/" + id + "/status");
    if (!status) throw OracleError("label service became unreachable");
    if (status->status != 200) {
      throw OracleError("status request failed (HTTP " + std::to_string(status->status) + ")");
    }
    const auto st = json::parse(status->body);
    const auto state = st.at("status").get<std::string>();
    if (state == "cancelled") throw OracleError("label session " + id + " was cancelled");
    if (state == "complete") break;
    if (std::chrono::steady_clock::now() >= deadline) {
      auto detail = client.Get("/sessions/" + id);
      std::string missing;
      if (detail && detail->status == 200) {
        const auto listing = json::parse(detail->body);
        for (const auto& q : listing.at("queries")) {
          if (q.at("answer").is_null()) {
            missing += (missing.empty() ? "" : ",") + std::to_string(q.at("index").get<int>());
          }
        }
      }
      throw OracleError("timed out waiting for labels; answered " +
                        std::to_string(st.at("answered").get<int>()) + "/" +
                        std::to_string(st.at("total").get<int>()) + ", missing indices [" +
                        missing + "]");
    }
    const auto remaining = deadline - std::chrono::steady_clock::now();
    std::this_thread::sleep_for(
        std::min<std::chrono::steady_clock::duration>(config_.poll_interval, remaining));
  }

  auto detail = client.Get("/sessions/" + id);
  if (!detail || detail->status != 200) throw OracleError("could not fetch answered session");
  const auto session = json::parse(detail->body);
  std::vector<int> labels(queries.size(), -1);
  for (const auto& q : session.at("queries")) {
    const auto index = q.at("index").get<std::size_t>();
    if (index >= labels.size() || q.at("answer").is_null()) {
      throw OracleError("session " + id + " reported complete with a missing answer");
    }
    labels[index] = q.at("answer").get<int>();
  }
  return labels;
}

}  // namespace hitl
