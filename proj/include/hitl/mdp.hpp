#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "hitl/json.hpp"
#include "hitl/random.hpp"

namespace hitl {

// Stage-indexed table over (state, action) pairs, flattened as s * A_h + a.
// Stages are 0-based throughout the library.
using StageTable = Eigen::VectorXd;
using RewardTable = std::vector<StageTable>;

// Deterministic non-stationary policy: actions[h][s].
struct Policy {
  std::vector<std::vector<std::size_t>> actions;

  std::size_t operator()(std::size_t h, std::size_t s) const { return actions[h][s]; }
  bool operator==(const Policy&) const = default;
};

// Uniform mixture over deterministic policies; one member is drawn per episode.
struct MixturePolicy {
  std::vector<Policy> members;
};

struct Transition {
  std::size_t stage;
  std::size_t state;
  std::size_t action;
  double reward;
  std::size_t next_state;
};

using Trajectory = std::vector<Transition>;

// Q has one table per stage; V has H + 1 entries with V[H] == 0.
struct ValueTables {
  std::vector<StageTable> q;
  std::vector<Eigen::VectorXd> v;
};

struct OptimalSolution {
  ValueTables values;
  Policy policy;
};

class TabularMDP {
 public:
  // transitions[h] has S * A_h rows and S columns; reward_levels[h][s * A_h + a]
  // is an integer k meaning reward k / levels.
  TabularMDP(std::size_t num_states, std::vector<std::size_t> actions_per_stage,
             std::vector<Eigen::MatrixXd> transitions,
             std::vector<std::vector<int>> reward_levels, int levels,
             std::size_t initial_state);

  std::size_t num_states() const { return num_states_; }
  std::size_t horizon() const { return actions_.size(); }
  std::size_t num_actions(std::size_t h) const { return actions_[h]; }
  std::size_t max_actions() const;
  std::size_t num_pairs(std::size_t h) const { return num_states_ * actions_[h]; }
  const std::vector<std::size_t>& actions_per_stage() const { return actions_; }
  int levels() const { return levels_; }
  std::size_t initial_state() const { return initial_state_; }

  std::size_t pair_index(std::size_t h, std::size_t s, std::size_t a) const {
    return s * actions_[h] + a;
  }

  const Eigen::MatrixXd& transitions(std::size_t h) const { return transitions_[h]; }
  auto transition_row(std::size_t h, std::size_t s, std::size_t a) const {
    return transitions_[h].row(static_cast<Eigen::Index>(pair_index(h, s, a)));
  }

  int reward_level(std::size_t h, std::size_t s, std::size_t a) const {
    return reward_levels_[h][pair_index(h, s, a)];
  }
  double reward(std::size_t h, std::size_t s, std::size_t a) const {
    return static_cast<double>(reward_level(h, s, a)) / levels_;
  }
  const std::vector<std::vector<int>>& reward_levels() const { return reward_levels_; }
  RewardTable reward_table() const;

  TabularMDP with_rewards(std::vector<std::vector<int>> reward_levels, int levels) const;

  // Empty reward table shaped like this MDP.
  RewardTable zero_rewards() const;

  bool policy_valid(const Policy& policy) const;

 private:
  std::size_t num_states_;
  std::vector<std::size_t> actions_;
  std::vector<Eigen::MatrixXd> transitions_;
  std::vector<std::vector<int>> reward_levels_;
  int levels_;
  std::size_t initial_state_;
};

// Reward values k / levels from integer level tables.
RewardTable levels_to_rewards(const std::vector<std::vector<int>>& levels, int num_levels);

// Greedy action over one state's Q row; ties go to the smallest action index.
std::size_t argmax_action(const StageTable& q, std::size_t s, std::size_t num_actions);

Trajectory rollout(const TabularMDP& mdp, const Policy& policy, Rng& rng);

OptimalSolution dp_optimal(const TabularMDP& mdp);
OptimalSolution dp_optimal(const TabularMDP& mdp, const RewardTable& rewards);

ValueTables dp_policy_values(const TabularMDP& mdp, const Policy& policy,
                             const RewardTable& rewards);

double dp_evaluate(const TabularMDP& mdp, const Policy& policy);
double dp_evaluate(const TabularMDP& mdp, const Policy& policy, const RewardTable& rewards);
double dp_evaluate(const TabularMDP& mdp, const MixturePolicy& policy);
double dp_evaluate(const TabularMDP& mdp, const MixturePolicy& policy,
                   const RewardTable& rewards);

double suboptimality(const TabularMDP& mdp, const Policy& policy);
double suboptimality(const TabularMDP& mdp, const MixturePolicy& policy);

void to_json(json& j, const TabularMDP& mdp);
TabularMDP mdp_from_json(const json& j);

void to_json(json& j, const Policy& policy);
void from_json(const json& j, Policy& policy);
void to_json(json& j, const MixturePolicy& policy);
void from_json(const json& j, MixturePolicy& policy);

}  // namespace hitl
