#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hitl/function_class.hpp"
#include "hitl/json.hpp"
#include "hitl/random.hpp"

namespace hitl {

struct Query {
  std::size_t stage = 0;
  std::size_t state = 0;
  std::size_t action = 0;
  Eigen::VectorXd feature;
  std::string description;
};

// A source of human feedback. Labels are reward levels k in {0..levels},
// meaning the value k / levels. Every answered query bumps the call counter
// exactly once, whichever entry point was used.
class FeedbackOracle {
 public:
  explicit FeedbackOracle(int levels);
  virtual ~FeedbackOracle() = default;
  FeedbackOracle(const FeedbackOracle&) = delete;
  FeedbackOracle& operator=(const FeedbackOracle&) = delete;

  int ask(const Query& query);
  std::vector<int> ask_batch(const std::vector<Query>& queries);

  std::size_t calls() const { return calls_.load(); }
  int levels() const { return levels_; }

 protected:
  virtual int answer(const Query& query) = 0;
  virtual std::vector<int> answer_batch(const std::vector<Query>& queries);

 private:
  int checked(int label) const;

  int levels_;
  std::atomic<std::size_t> calls_{0};
};

// Maps f*(z) and the level count n to label probabilities (p_0 .. p_n) with
// sum_i p_i * i / n == f*(z).
using ResponseSpec = std::function<Eigen::VectorXd(double, int)>;

// Mean-matched two-point law on the levels bracketing f*; collapses to a
// point mass when f* sits exactly on a level.
Eigen::VectorXd two_point_spec(double f, int levels);

class SimulatedOracle : public FeedbackOracle {
 public:
  SimulatedOracle(ResponseModel model, int levels, std::uint64_t seed,
                  ResponseSpec spec = two_point_spec);

 protected:
  int answer(const Query& query) override;

 private:
  ResponseModel model_;
  ResponseSpec spec_;
  Rng rng_;
  std::mutex mutex_;
};

struct TranscriptRecord {
  std::size_t index = 0;
  std::size_t stage = 0;
  std::size_t state = 0;
  std::size_t action = 0;
  Eigen::VectorXd feature;
  int level = 0;
  int levels = 1;
  std::int64_t timestamp_ms = 0;
};

void to_json(json& j, const TranscriptRecord& record);
TranscriptRecord transcript_record_from_json(const json& j);

std::vector<TranscriptRecord> read_transcript(const std::string& path);
std::vector<TranscriptRecord> read_transcript(std::istream& in);

// Replays recorded labels in order; any divergence is a hard error.
class ScriptedOracle : public FeedbackOracle {
 public:
  ScriptedOracle(std::vector<TranscriptRecord> transcript, int levels);

  std::size_t remaining() const { return transcript_.size() - cursor_; }

 protected:
  int answer(const Query& query) override;

 private:
  std::vector<TranscriptRecord> transcript_;
  std::size_t cursor_ = 0;
  std::mutex mutex_;
};

// Forwards to another oracle and appends one JSON line per answered query.
class RecordingOracle : public FeedbackOracle {
 public:
  RecordingOracle(FeedbackOracle& inner, std::ostream& out);

  const std::vector<TranscriptRecord>& records() const { return records_; }

 protected:
  int answer(const Query& query) override;
  std::vector<int> answer_batch(const std::vector<Query>& queries) override;

 private:
  void record(const Query& query, int level);

  FeedbackOracle& inner_;
  std::ostream& out_;
  std::vector<TranscriptRecord> records_;
  std::mutex mutex_;
};

struct RemoteOracleConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::chrono::milliseconds poll_interval{2000};
  std::chrono::milliseconds timeout{std::chrono::hours(24)};
  // Attach the first batch to this existing session instead of creating one.
  std::optional<std::string> resume_session;
};

// Posts each batch to a label service as one session and blocks until a
// person has answered all of it.
class RemoteOracle : public FeedbackOracle {
 public:
  RemoteOracle(RemoteOracleConfig config, int levels);

  const std::vector<std::string>& sessions() const { return sessions_; }

 protected:
  int answer(const Query& query) override;
  std::vector<int> answer_batch(const std::vector<Query>& queries) override;

 private:
  RemoteOracleConfig config_;
  std::vector<std::string> sessions_;
};

}  // namespace hitl
