#include "hitl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hitl/errors.hpp"

namespace hitl {

namespace {

constexpr double kRowTolerance = 1e-9;

void require(bool cond, const std::string& what) {
  if (!cond) throw DataError(what);
}

void check_reward_shape(const TabularMDP& mdp, const RewardTable& rewards) {
  require(rewards.size() == mdp.horizon(), "reward table has wrong number of stages");
  for (std::size_t h = 0; h < mdp.horizon(); ++h) {
    require(static_cast<std::size_t>(rewards[h].size()) == mdp.num_pairs(h),
            "reward table stage " + std::to_string(h) + " has wrong size");
  }
}

void check_policy(const TabularMDP& mdp, const Policy& policy) {
  require(mdp.policy_valid(policy), "policy shape does not match MDP");
}

// Q_h = r_h + P_h V_{h+1} for all (s, a) at one stage.
StageTable bellman_q(const TabularMDP& mdp, std::size_t h, const StageTable& rewards,
                     const Eigen::VectorXd& next_v) {
  return rewards + mdp.transitions(h) * next_v;
}

}  // namespace

TabularMDP::TabularMDP(std::size_t num_states, std::vector<std::size_t> actions_per_stage,
                       std::vector<Eigen::MatrixXd> transitions,
                       std::vector<std::vector<int>> reward_levels, int levels,
                       std::size_t initial_state)
    : num_states_(num_states),
      actions_(std::move(actions_per_stage)),
      transitions_(std::move(transitions)),
      reward_levels_(std::move(reward_levels)),
      levels_(levels),
      initial_state_(initial_state) {
  require(num_states_ > 0, "MDP needs at least one state");
  require(!actions_.empty(), "MDP horizon must be positive");
  require(levels_ >= 1, "reward level count must be positive");
  require(initial_state_ < num_states_, "initial state out of range");
  require(transitions_.size() == actions_.size(), "transition stages do not match horizon");
  require(reward_levels_.size() == actions_.size(), "reward stages do not match horizon");
  const auto s_count = static_cast<Eigen::Index>(num_states_);
  for (std::size_t h = 0; h < actions_.size(); ++h) {
    require(actions_[h] > 0, "stage " + std::to_string(h) + " has no actions");
    const auto& p = transitions_[h];
    require(p.rows() == static_cast<Eigen::Index>(num_pairs(h)) && p.cols() == s_count,
            "transition table stage " + std::to_string(h) + " has wrong shape");
    for (Eigen::Index row = 0; row < p.rows(); ++row) {
      require((p.row(row).array() >= 0.0).all(),
              "negative transition probability at stage " + std::to_string(h));
      require(std::abs(p.row(row).sum() - 1.0) <= kRowTolerance,
              "transition row does not sum to 1 at stage " + std::to_string(h));
    }
    require(reward_levels_[h].size() == num_pairs(h),
            "reward table stage " + std::to_string(h) + " has wrong size");
    for (int k : reward_levels_[h]) {
      require(k >= 0 && k <= levels_, "reward level out of range");
    }
  }
}

std::size_t TabularMDP::max_actions() const {
  return *std::max_element(actions_.begin(), actions_.end());
}

RewardTable TabularMDP::reward_table() const {
  RewardTable table(horizon());
  for (std::size_t h = 0; h < horizon(); ++h) {
    table[h].resize(static_cast<Eigen::Index>(num_pairs(h)));
    for (std::size_t i = 0; i < num_pairs(h); ++i) {
      table[h][static_cast<Eigen::Index>(i)] =
          static_cast<double>(reward_levels_[h][i]) / levels_;
    }
  }
  return table;
}

RewardTable TabularMDP::zero_rewards() const {
  RewardTable table(horizon());
  for (std::size_t h = 0; h < horizon(); ++h) {
    table[h] = StageTable::Zero(static_cast<Eigen::Index>(num_pairs(h)));
  }
  return table;
}

TabularMDP TabularMDP::with_rewards(std::vector<std::vector<int>> reward_levels,
                                    int levels) const {
  return TabularMDP(num_states_, actions_, transitions_, std::move(reward_levels), levels,
                    initial_state_);
}

bool TabularMDP::policy_valid(const Policy& policy) const {
  if (policy.actions.size() != horizon()) return false;
  for (std::size_t h = 0; h < horizon(); ++h) {
    if (policy.actions[h].size() != num_states_) return false;
    for (std::size_t a : policy.actions[h]) {
      if (a >= actions_[h]) return false;
    }
  }
  return true;
}

RewardTable levels_to_rewards(const std::vector<std::vector<int>>& levels, int num_levels) {
  RewardTable out;
  for (const auto& stage : levels) {
    StageTable r(static_cast<Eigen::Index>(stage.size()));
    for (std::size_t p = 0; p < stage.size(); ++p) {
      r[static_cast<Eigen::Index>(p)] = static_cast<double>(stage[p]) / num_levels;
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::size_t argmax_action(const StageTable& q, std::size_t s, std::size_t num_actions) {
  std::size_t best = 0;
  double best_value = q[static_cast<Eigen::Index>(s * num_actions)];
  for (std::size_t a = 1; a < num_actions; ++a) {
    const double value = q[static_cast<Eigen::Index>(s * num_actions + a)];
    if (value > best_value) {
      best_value = value;
      best = a;
    }
  }
  return best;
}

Trajectory rollout(const TabularMDP& mdp, const Policy& policy, Rng& rng) {
  check_policy(mdp, policy);
  Trajectory trajectory;
  trajectory.reserve(mdp.horizon());
  std::size_t s = mdp.initial_state();
  for (std::size_t h = 0; h < mdp.horizon(); ++h) {
    const std::size_t a = policy(h, s);
    const std::size_t next = sample_index(mdp.transition_row(h, s, a), rng);
    trajectory.push_back({h, s, a, mdp.reward(h, s, a), next});
    s = next;
  }
  return trajectory;
}

OptimalSolution dp_optimal(const TabularMDP& mdp) { return dp_optimal(mdp, mdp.reward_table()); }

OptimalSolution dp_optimal(const TabularMDP& mdp, const RewardTable& rewards) {
  check_reward_shape(mdp, rewards);
  const std::size_t horizon = mdp.horizon();
  const auto s_count = static_cast<Eigen::Index>(mdp.num_states());
  OptimalSolution out;
  out.values.q.resize(horizon);
  out.values.v.assign(horizon + 1, Eigen::VectorXd::Zero(s_count));
  out.policy.actions.assign(horizon, std::vector<std::size_t>(mdp.num_states(), 0));
  for (std::size_t h = horizon; h-- > 0;) {
    out.values.q[h] = bellman_q(mdp, h, rewards[h], out.values.v[h + 1]);
    const std::size_t actions = mdp.num_actions(h);
    for (std::size_t s = 0; s < mdp.num_states(); ++s) {
      const std::size_t a = argmax_action(out.values.q[h], s, actions);
      out.policy.actions[h][s] = a;
      out.values.v[h][static_cast<Eigen::Index>(s)] =
          out.values.q[h][static_cast<Eigen::Index>(s * actions + a)];
    }
  }
  return out;
}

ValueTables dp_policy_values(const TabularMDP& mdp, const Policy& policy,
                             const RewardTable& rewards) {
  check_policy(mdp, policy);
  check_reward_shape(mdp, rewards);
  const std::size_t horizon = mdp.horizon();
  ValueTables values;
  values.q.resize(horizon);
  values.v.assign(horizon + 1, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mdp.num_states())));
  for (std::size_t h = horizon; h-- > 0;) {
    values.q[h] = bellman_q(mdp, h, rewards[h], values.v[h + 1]);
    for (std::size_t s = 0; s < mdp.num_states(); ++s) {
      values.v[h][static_cast<Eigen::Index>(s)] =
          values.q[h][static_cast<Eigen::Index>(mdp.pair_index(h, s, policy(h, s)))];
    }
  }
  return values;
}

double dp_evaluate(const TabularMDP& mdp, const Policy& policy) {
  return dp_evaluate(mdp, policy, mdp.reward_table());
}

double dp_evaluate(const TabularMDP& mdp, const Policy& policy, const RewardTable& rewards) {
  return dp_policy_values(mdp, policy, rewards).v[0][static_cast<Eigen::Index>(mdp.initial_state())];
}

double dp_evaluate(const TabularMDP& mdp, const MixturePolicy& policy) {
  return dp_evaluate(mdp, policy, mdp.reward_table());
}

double dp_evaluate(const TabularMDP& mdp, const MixturePolicy& policy,
                   const RewardTable& rewards) {
  if (policy.members.empty()) throw DataError("mixture policy has no members");
  double total = 0.0;
  for (const auto& member : policy.members) total += dp_evaluate(mdp, member, rewards);
  return total / static_cast<double>(policy.members.size());
}

double suboptimality(const TabularMDP& mdp, const Policy& policy) {
  const auto opt = dp_optimal(mdp);
  return opt.values.v[0][static_cast<Eigen::Index>(mdp.initial_state())] - dp_evaluate(mdp, policy);
}

double suboptimality(const TabularMDP& mdp, const MixturePolicy& policy) {
  const auto opt = dp_optimal(mdp);
  return opt.values.v[0][static_cast<Eigen::Index>(mdp.initial_state())] - dp_evaluate(mdp, policy);
}

void to_json(json& j, const TabularMDP& mdp) {
  json p = json::array();
  json r = json::array();
  for (std::size_t h = 0; h < mdp.horizon(); ++h) {
    json p_stage = json::array();
    json r_stage = json::array();
    for (std::size_t s = 0; s < mdp.num_states(); ++s) {
      json p_state = json::array();
      json r_state = json::array();
      for (std::size_t a = 0; a < mdp.num_actions(h); ++a) {
        p_state.push_back(vector_to_json(mdp.transition_row(h, s, a).transpose()));
        r_state.push_back(mdp.reward_level(h, s, a));
      }
      p_stage.push_back(std::move(p_state));
      r_stage.push_back(std::move(r_state));
    }
    p.push_back(std::move(p_stage));
    r.push_back(std::move(r_stage));
  }
  j = json{{"S", mdp.num_states()},
           {"H", mdp.horizon()},
           {"actions", mdp.actions_per_stage()},
           {"P", std::move(p)},
           {"r", std::move(r)},
           {"levels", mdp.levels()},
           {"s1", mdp.initial_state()}};
}

TabularMDP mdp_from_json(const json& j) {
  try {
    const auto s_count = j.at("S").get<std::size_t>();
    const auto horizon = j.at("H").get<std::size_t>();
    auto actions = j.at("actions").get<std::vector<std::size_t>>();
    require(actions.size() == horizon, "actions list length differs from H");
    const auto& p = j.at("P");
    const auto& r = j.at("r");
    require(p.size() == horizon && r.size() == horizon, "P/r stage count differs from H");
    std::vector<Eigen::MatrixXd> transitions(horizon);
    std::vector<std::vector<int>> rewards(horizon);
    for (std::size_t h = 0; h < horizon; ++h) {
      require(p[h].size() == s_count && r[h].size() == s_count, "P/r state count differs from S");
      transitions[h].resize(static_cast<Eigen::Index>(s_count * actions[h]),
                            static_cast<Eigen::Index>(s_count));
      for (std::size_t s = 0; s < s_count; ++s) {
        require(p[h][s].size() == actions[h] && r[h][s].size() == actions[h],
                "P/r action count differs from actions[h]");
        for (std::size_t a = 0; a < actions[h]; ++a) {
          const auto row = vector_from_json(p[h][s][a]);
          require(static_cast<std::size_t>(row.size()) == s_count, "transition row length != S");
          transitions[h].row(static_cast<Eigen::Index>(s * actions[h] + a)) = row.transpose();
          rewards[h].push_back(r[h][s][a].get<int>());
        }
      }
    }
    return TabularMDP(s_count, std::move(actions), std::move(transitions), std::move(rewards),
                      j.at("levels").get<int>(), j.at("s1").get<std::size_t>());
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed MDP document: ") + e.what());
  }
}

void to_json(json& j, const Policy& policy) { j = policy.actions; }

void from_json(const json& j, Policy& policy) {
  policy.actions = j.get<std::vector<std::vector<std::size_t>>>();
}

void to_json(json& j, const MixturePolicy& policy) {
  j = json::array();
  for (const auto& m : policy.members) j.push_back(m);
}

void from_json(const json& j, MixturePolicy& policy) {
  policy.members.clear();
  for (const auto& m : j) policy.members.push_back(m.get<Policy>());
}

}  // namespace hitl
