#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "hitl/active_reward.hpp"
#include "hitl/env.hpp"
#include "hitl/online.hpp"

namespace hitl {

// Runs fn(0..count-1) on `jobs` threads. Results land at their own index, so
// output order never depends on scheduling.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

struct Fig1Config {
  EnvConfig env;
  std::size_t episodes = 2000;
  double delta = 0.1;
  std::vector<double> margins{0.05};
  std::vector<std::size_t> budgets{10, 20, 30, 40, 50, 70, 100, 150, 200, 300, 500, 1000};
  std::vector<SelectionMode> methods{SelectionMode::active, SelectionMode::passive};
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  ExploreOptions explore;
  BonusConfig plan_bonus;
  RewardLearningConfig reward;
};

// Experiment defaults: S = 20, A = (10, 3), H = 2, d = 5, K = 2000.
Fig1Config fig1_left_defaults();
// Fixed N = 100 per stage, margins {0.02, 0.05, 0.1}.
Fig1Config fig1_right_defaults();

struct Fig1Row {
  std::string method;
  double margin = 0.0;
  std::size_t n_queries = 0;
  std::size_t episodes = 0;
  std::size_t trial = 0;
  double error = 0.0;
  std::size_t env_steps = 0;
  std::size_t oracle_calls = 0;
};

std::vector<Fig1Row> run_fig1(const Fig1Config& config);

// Header: method,delta,n_queries,k,trial,error,env_steps,oracle_calls
void write_csv(std::ostream& out, const std::vector<Fig1Row>& rows);

struct Fig1Cell {
  std::string method;
  double margin = 0.0;
  std::size_t n_queries = 0;
  double mean_error = 0.0;
  double stderr_error = 0.0;
  std::size_t trials = 0;
};

std::vector<Fig1Cell> summarize(const std::vector<Fig1Row>& rows);

// Smallest budget whose mean error is <= target, or 0 when none is.
std::size_t queries_to_reach(const std::vector<Fig1Cell>& cells, const std::string& method,
                             double margin, double target);

}  // namespace hitl
