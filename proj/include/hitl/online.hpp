#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hitl/active_reward.hpp"
#include "hitl/dataset.hpp"
#include "hitl/features.hpp"
#include "hitl/mdp.hpp"
#include "hitl/oracle.hpp"
#include "hitl/random.hpp"

namespace hitl {

// Black-box episodic simulator. Exposes reset/step only, so code holding a
// sampler cannot read rewards.
class EnvironmentSampler {
 public:
  EnvironmentSampler(const TabularMDP& mdp, std::uint64_t seed);

  std::size_t num_states() const { return mdp_->num_states(); }
  std::size_t horizon() const { return mdp_->horizon(); }
  std::size_t num_actions(std::size_t h) const { return mdp_->num_actions(h); }
  const std::vector<std::size_t>& actions_per_stage() const { return mdp_->actions_per_stage(); }

  std::size_t reset();
  std::size_t step(std::size_t action);
  std::size_t stage() const { return stage_; }
  std::size_t steps() const { return steps_; }

 private:
  const TabularMDP* mdp_;
  Rng rng_;
  std::size_t stage_ = 0;
  std::size_t state_ = 0;
  bool running_ = false;
  std::size_t steps_ = 0;
};

enum class Variant { tabular, linear };

std::string to_string(Variant variant);
Variant variant_from_string(const std::string& name);

struct BonusConfig {
  double beta_lin = 1.0;
  double beta_tbl = 1.0;
  double beta_tbl_offline = 1.0;
  double c_explore = 1.0;

  void validate() const;
};

struct BonusScale {
  std::size_t num_states = 1;
  std::size_t num_actions = 1;  // max over stages
  std::size_t horizon = 1;
  std::size_t episodes = 1;
  double delta = 0.1;
  double margin = 0.1;
  std::size_t dim = 1;
  double dim_f = 2.0;
};

// beta_lin = C d H sqrt(dim_f ln(d H K / (delta margin))),
// beta_tbl = C H sqrt(ln(S A H K / delta)),
// beta'_tbl = C H sqrt(S ln(S A H K / delta)), C_explore = C.
BonusConfig theory_bonus_config(const BonusScale& scale, double c = 1.0);

// Empirical transitions; unvisited pairs get the uniform row 1/S.
Eigen::MatrixXd estimate_p_tabular(const TrajectoryDataset& data, std::size_t h);

// Ridge estimate of (P_h V)(s, a) over all pairs of stage h from the first
// `upto` episodes.
StageTable estimate_pv_linear(const TrajectoryDataset& data, const FeatureMap& features,
                              std::size_t h, const Eigen::VectorXd& v_next, std::size_t upto);
inline StageTable estimate_pv_linear(const TrajectoryDataset& data, const FeatureMap& features,
                                     std::size_t h, const Eigen::VectorXd& v_next) {
  return estimate_pv_linear(data, features, h, v_next, data.episodes());
}

// min(beta / sqrt(N), H) with N = 0 mapped to H.
StageTable optimism_bonus_tabular(const Eigen::VectorXd& visits, double beta, double horizon);
// min(beta sqrt(phi^T Lambda^-1 phi), H) for every row of the stage features.
StageTable optimism_bonus_linear(const Eigen::MatrixXd& stage_features,
                                 const Eigen::MatrixXd& gram_inverse, double beta,
                                 double horizon);
// C H^2 S / N + 2 Gamma, and H where N = 0.
StageTable exploration_bonus_tabular(const Eigen::VectorXd& visits, const StageTable& gamma,
                                     double c_explore, double horizon, std::size_t num_states);
inline StageTable exploration_bonus_linear(const StageTable& gamma) { return 3.0 * gamma; }

// Dataset-level forms. A null feature map selects the tabular formulas.
StageTable optimism_bonus(const TrajectoryDataset& data, std::size_t h, const BonusConfig& config,
                          const FeatureMap* features = nullptr);
StageTable exploration_bonus(const TrajectoryDataset& data, std::size_t h,
                             const BonusConfig& config, const FeatureMap* features = nullptr);

struct ExploreOptions {
  Variant variant = Variant::tabular;
  BonusConfig bonus;
};

// Reward-free exploration for K episodes. The linear variant needs features.
TrajectoryDataset explore(EnvironmentSampler& env, std::size_t episodes,
                          const ExploreOptions& options, const FeatureMap* features = nullptr);

struct PlanConfig {
  Variant variant = Variant::tabular;
  BonusConfig bonus;
  RewardLearningConfig reward;
  bool validate = false;
  std::uint64_t seed = 0;
  bool keep_values = false;
};

// K optimistic backward passes with a fixed reward. Pass k sees the first
// k - 1 episodes.
struct PlanningPasses {
  MixturePolicy policy;
  std::vector<ValueTables> values;  // one per pass when kept
  ValueTables last;
};

PlanningPasses planning_passes(const TrajectoryDataset& data, const RewardTable& rewards,
                               const BonusConfig& bonus, Variant variant,
                               const FeatureMap* features = nullptr, bool keep_values = false);

struct PlanResult {
  MixturePolicy policy;
  RewardEstimate reward;
  std::vector<std::vector<int>> reward_levels;
  std::vector<RewardLearning> stages;
  std::vector<QueryPool> pools;
  std::size_t oracle_calls = 0;
  PlanningPasses passes;
};

// Per-stage reward learning at confidence delta / (2H), then planning.
PlanResult plan(const TrajectoryDataset& data, const FeatureMap& features, FeedbackOracle& oracle,
                double margin, double delta, const PlanConfig& config,
                const std::vector<std::vector<std::string>>& describe = {});

// The best mixture member under the true MDP. Diagnostic only.
struct BestIterate {
  std::size_t index = 0;
  double value = 0.0;
};
BestIterate best_iterate(const TabularMDP& mdp, const MixturePolicy& policy);

}  // namespace hitl
