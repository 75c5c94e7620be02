#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "hitl/json.hpp"

using hitl::json;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hitl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(const std::string& args) const {
    const std::string cmd = std::string(HITL_CLI) + " " + args + " > " + path("stdout.txt") +
                            " 2> " + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const std::string& name) const {
    std::ifstream in(path(name));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void make_env_and_data() {
    ASSERT_EQ(run("gen-env --states 8 --actions 3 3 --dim 3 --margin 0.1 --seed 3 --out " +
                  path("env.json")),
              0)
        << read("stderr.txt");
    ASSERT_EQ(run("explore --env " + path("env.json") + " --episodes 40 --seed 1 --out " +
                  path("data.json")),
              0)
        << read("stderr.txt");
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, ExploreReportsStepsAndNoQueries) {
  make_env_and_data();
  const auto report = json::parse(read("stdout.txt"));
  EXPECT_EQ(report.at("env_steps"), 80);
  EXPECT_EQ(report.at("oracle_calls"), 0);
  EXPECT_EQ(report.at("episodes"), 40);
}

TEST_F(Cli, PlanWritesPolicyAndMetrics) {
  make_env_and_data();
  ASSERT_EQ(run("plan --env " + path("env.json") + " --dataset " + path("data.json") +
                " --margin 0.1 --budget 15 --out " + path("policy.json") + " --metrics " +
                path("metrics.json")),
            0)
      << read("stderr.txt");
  const auto m = json::parse(read("metrics.json"));
  EXPECT_LE(m.at("oracle_calls").get<int>(), 2 * 15);
  EXPECT_EQ(m.at("env_steps"), 80);
  EXPECT_GE(m.at("suboptimality").get<double>(), -1e-12);
  const auto policy = json::parse(read("policy.json"));
  EXPECT_TRUE(policy.contains("mixture"));
  EXPECT_TRUE(policy.contains("reward"));
}

TEST_F(Cli, PlanIsDeterministicUnderSeed) {
  make_env_and_data();
  const std::string base = "plan --env " + path("env.json") + " --dataset " + path("data.json") +
                           " --margin 0.1 --budget 10 --seed 4 --out ";
  ASSERT_EQ(run(base + path("a.json")), 0);
  ASSERT_EQ(run(base + path("b.json")), 0);
  EXPECT_EQ(read("a.json"), read("b.json"));
}

TEST_F(Cli, OfflineCollectsAndPlans) {
  ASSERT_EQ(run("gen-env --states 6 --actions 2 2 --dim 3 --margin 0.1 --seed 2 --out " +
                path("env.json")),
            0);
  ASSERT_EQ(run("offline --env " + path("env.json") + " --episodes 50 --budget 10 --out " +
                path("pi.json") + " --save-dataset " + path("d.json") + " --metrics " +
                path("m.json")),
            0)
      << read("stderr.txt");
  const auto m = json::parse(read("m.json"));
  EXPECT_LE(m.at("pessimistic_value").get<double>(), m.at("value").get<double>() + 1e-12);
  EXPECT_TRUE(fs::exists(path("d.json")));
}

TEST_F(Cli, Fig1CsvIsByteIdenticalAcrossRuns) {
  const std::string args = "reproduce-fig1 --panel left --trials 2 --seed 7 --episodes 30 "
                           "--budgets 5 10 --out ";
  ASSERT_EQ(run(args + path("a.csv")), 0) << read("stderr.txt");
  ASSERT_EQ(run(args + path("b.csv") + " --jobs 2"), 0);
  const auto a = read("a.csv");
  EXPECT_EQ(a, read("b.csv"));
  EXPECT_EQ(a.substr(0, a.find('\n')), "method,delta,n_queries,k,trial,error,env_steps,oracle_calls");
  std::istringstream lines(a);
  std::string line;
  std::getline(lines, line);
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    EXPECT_NE(line.find(",30,"), std::string::npos);
    EXPECT_NE(line.find(",60,"), std::string::npos);
  }
  EXPECT_EQ(rows, 2 * 2 * 2);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("explore --bogus"), 2);
  EXPECT_EQ(run("reproduce-fig1 --panel middle"), 2);
  EXPECT_EQ(run("plan --env x --dataset y --margin 0.1 --guess-delta --out z"), 2);
}

TEST_F(Cli, DataErrorsExitThree) {
  EXPECT_EQ(run("explore --env " + path("missing.json") + " --out " + path("o.json")), 3);
  std::ofstream(path("bad.json")) << "{ not json";
  EXPECT_EQ(run("explore --env " + path("bad.json") + " --out " + path("o.json")), 3);
  make_env_and_data();
  auto data = json::parse(read("data.json"));
  data["episodes"][0]["actions"][0] = 1 - data["episodes"][0]["actions"][0].get<int>();
  std::ofstream(path("tampered.json")) << data.dump();
  EXPECT_EQ(run("plan --env " + path("env.json") + " --dataset " + path("tampered.json") +
                " --margin 0.1 --out " + path("p.json")),
            3);
}

TEST_F(Cli, UnreachableServiceExitsFour) {
  make_env_and_data();
  EXPECT_EQ(run("plan --env " + path("env.json") + " --dataset " + path("data.json") +
                " --margin 0.1 --budget 5 --oracle remote --port 1 --out " + path("p.json")),
            4);
}

TEST_F(Cli, ConfigFileLosesToFlags) {
  std::ofstream(path("cfg.json")) << R"({"states": 5, "dim": 2, "seed": 9, "actions": [2, 2]})";
  ASSERT_EQ(run("gen-env --config " + path("cfg.json") + " --states 7 --out " + path("env.json")),
            0)
      << read("stderr.txt");
  const auto env = json::parse(read("env.json"));
  ASSERT_EQ(run("gen-env --states 7 --dim 2 --seed 9 --actions 2 2 --out " + path("ref.json")),
            0);
  EXPECT_EQ(env.dump(), json::parse(read("ref.json")).dump());
  std::ofstream(path("broken.json")) << "[1, 2";
  EXPECT_EQ(run("gen-env --config " + path("broken.json") + " --out " + path("e.json")), 3);
}
