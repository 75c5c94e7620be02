#include <sstream>
#include <thread>

#include <gtest/gtest.h>

#include "hitl/errors.hpp"
#include "hitl/oracle.hpp"

using namespace hitl;

namespace {

ResponseModel constant_model(double f) {
  // Linear f = (<phi, w> + 1) / 2 with phi = e1.
  return {ModelKind::linear, {Eigen::Vector2d(2.0 * f - 1.0, 0.0)}, ""};
}

Query query_at(std::size_t state, std::size_t action = 0) {
  Query q;
  q.state = state;
  q.action = action;
  q.feature = Eigen::Vector2d(1.0, 0.0);
  return q;
}

}  // namespace

TEST(TwoPointSpec, MeanMatchedAndCollapsesOnLevels) {
  for (int n : {1, 2, 5}) {
    for (double f : {0.0, 0.13, 0.5, 0.77, 1.0}) {
      const auto p = two_point_spec(f, n);
      EXPECT_NEAR(p.sum(), 1.0, 1e-15);
      EXPECT_NEAR(p.dot(Eigen::VectorXd::LinSpaced(n + 1, 0.0, 1.0)), f, 1e-12);
      EXPECT_LE((p.array() > 0.0).count(), 2);
    }
  }
  const auto p = two_point_spec(0.5, 2);
  EXPECT_DOUBLE_EQ(p[1], 1.0);
}

TEST(SimulatedOracle, CertainResponse) {
  SimulatedOracle oracle(constant_model(1.0), 1, 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(oracle.ask(query_at(0)), 1);
  EXPECT_EQ(oracle.calls(), 100u);
}

TEST(SimulatedOracle, EmpiricalMeanMatches) {
  SimulatedOracle oracle(constant_model(0.75), 1, 5);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += oracle.ask(query_at(0));
  EXPECT_NEAR(sum / n, 0.75, 0.005);
}

TEST(SimulatedOracle, TwoLevelPointMassOnHalf) {
  SimulatedOracle oracle(constant_model(0.5), 2, 5);
  for (int i = 0; i < 200; ++i) EXPECT_EQ(oracle.ask(query_at(0)), 1);
}

TEST(SimulatedOracle, BatchCountsEachQuery) {
  SimulatedOracle oracle(constant_model(0.3), 1, 5);
  const auto labels = oracle.ask_batch(std::vector<Query>(17, query_at(0)));
  EXPECT_EQ(labels.size(), 17u);
  EXPECT_EQ(oracle.calls(), 17u);
}

TEST(SimulatedOracle, ConcurrentCallsAreCounted) {
  SimulatedOracle oracle(constant_model(0.4), 1, 5);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 1000; ++i) oracle.ask(query_at(0));
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(oracle.calls(), 4000u);
}

TEST(SimulatedOracle, RejectsNonMeanMatchedSpec) {
  ResponseSpec biased = [](double, int n) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n + 1);
    p[n] = 1.0;
    return p;
  };
  SimulatedOracle oracle(constant_model(0.3), 1, 5, biased);
  EXPECT_THROW(oracle.ask(query_at(0)), DataError);
}

TEST(Transcript, RecordThenReplay) {
  SimulatedOracle inner(constant_model(0.6), 1, 9);
  std::stringstream log;
  RecordingOracle recorder(inner, log);
  std::vector<Query> qs;
  for (std::size_t s = 0; s < 5; ++s) qs.push_back(query_at(s, s % 2));
  const auto labels = recorder.ask_batch(qs);
  EXPECT_EQ(recorder.calls(), 5u);
  EXPECT_EQ(inner.calls(), 5u);

  ScriptedOracle replay(read_transcript(log), 1);
  EXPECT_EQ(replay.ask_batch(qs), labels);
  EXPECT_EQ(replay.remaining(), 0u);
}

TEST(Transcript, MismatchNamesTheIndex) {
  std::stringstream log;
  log << R"({"index":0,"stage":0,"state":0,"action":0,"feature":[1,0],"label":1,"levels":1})" << '\n'
      << R"({"index":1,"stage":0,"state":1,"action":0,"feature":[1,0],"label":0,"levels":1})" << '\n';
  ScriptedOracle oracle(read_transcript(log), 1);
  EXPECT_EQ(oracle.ask(query_at(0)), 1);
  try {
    oracle.ask(query_at(3));
    FAIL() << "expected a mismatch";
  } catch (const OracleError& e) {
    EXPECT_NE(std::string(e.what()).find("query 1"), std::string::npos);
  }
}

TEST(Transcript, EmptyTranscriptFails) {
  ScriptedOracle oracle({}, 1);
  EXPECT_THROW(oracle.ask(query_at(0)), OracleError);
}

TEST(Transcript, MalformedLineIsDataError) {
  std::stringstream log("{not json}\n");
  EXPECT_THROW(read_transcript(log), DataError);
}

TEST(Transcript, LabelOutsideLevelsRejected) {
  std::stringstream log;
  log << R"({"index":0,"stage":0,"state":0,"action":0,"feature":[1,0],"label":2,"levels":1})" << '\n';
  ScriptedOracle oracle(read_transcript(log), 1);
  EXPECT_THROW(oracle.ask(query_at(0)), OracleError);
}
