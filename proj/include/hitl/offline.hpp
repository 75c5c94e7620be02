#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hitl/active_reward.hpp"
#include "hitl/dataset.hpp"
#include "hitl/features.hpp"
#include "hitl/mdp.hpp"
#include "hitl/online.hpp"
#include "hitl/oracle.hpp"

namespace hitl {

// Rolls out episode k with behaviors[k % size], drawing one member per episode
// from a mixture. Next states come from the true kernel, so the dataset is
// compliant. Provenance records the seed and the member used per episode.
TrajectoryDataset collect_compliant(const TabularMDP& mdp,
                                    const std::vector<MixturePolicy>& behaviors,
                                    std::size_t episodes, std::uint64_t seed);
TrajectoryDataset collect_compliant(const TabularMDP& mdp, const Policy& behavior,
                                    std::size_t episodes, std::uint64_t seed);

struct OfflineConfig {
  BonusConfig bonus;
  RewardLearningConfig reward;
};

struct PessimisticPlan {
  Policy policy;
  ValueTables values;              // V-hat and Q-hat
  std::vector<StageTable> gamma;   // beta' (N + 1)^-1/2
};

// Q_h = clip(r_h + P-hat V_{h+1} - 2 Gamma_h, 0, H - h), greedy in Q.
PessimisticPlan pessimistic_plan(const TrajectoryDataset& data, const RewardTable& rewards,
                                 double beta_offline);

struct LcbviResult {
  PessimisticPlan plan;
  RewardEstimate reward;
  std::vector<std::vector<int>> reward_levels;
  std::vector<RewardLearning> stages;
  std::size_t oracle_calls = 0;
};

LcbviResult lcbvi(const TrajectoryDataset& data, const FeatureMap& features,
                  FeedbackOracle& oracle, double margin, double delta,
                  const OfflineConfig& config,
                  const std::vector<std::vector<std::string>>& describe = {});

// E_{pi*}[sum_h (N_h(s_h, a_h) + 1)^-1/2], exact through the state occupancy
// of the optimal policy of the true MDP.
double optimal_coverage(const TrajectoryDataset& data, const TabularMDP& mdp);

// 2 H sqrt(S ln(S A H K / delta)) * optimal_coverage. Needs the true MDP, so
// it is a white-box diagnostic and never feeds the learner.
double gap_bound(const TrajectoryDataset& data, const TabularMDP& mdp, double delta);

}  // namespace hitl
