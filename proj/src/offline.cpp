#include "hitl/offline.hpp"

#include <algorithm>
#include <cmath>

#include "hitl/errors.hpp"

namespace hitl {

TrajectoryDataset collect_compliant(const TabularMDP& mdp,
                                    const std::vector<MixturePolicy>& behaviors,
                                    std::size_t episodes, std::uint64_t seed) {
  if (behaviors.empty()) throw DataError("need at least one behavior policy");
  for (const auto& b : behaviors) {
    if (b.members.empty()) throw DataError("behavior mixture has no members");
    for (const auto& p : b.members) {
      if (!mdp.policy_valid(p)) throw DataError("behavior policy invalid for this MDP");
    }
  }
  Rng rng(seed);
  TrajectoryDataset data(mdp.num_states(), mdp.actions_per_stage());
  json used = json::array();
  for (std::size_t k = 0; k < episodes; ++k) {
    const std::size_t b = k % behaviors.size();
    const auto& mix = behaviors[b];
    const std::size_t m =
        mix.members.size() == 1
            ? 0
            : std::uniform_int_distribution<std::size_t>(0, mix.members.size() - 1)(rng);
    const auto& policy = mix.members[m];
    std::vector<std::size_t> states{mdp.initial_state()};
    std::vector<std::size_t> taken;
    for (std::size_t h = 0; h < mdp.horizon(); ++h) {
      const auto s = states.back();
      taken.push_back(policy(h, s));
      states.push_back(sample_index(mdp.transition_row(h, s, taken.back()), rng));
    }
    data.add_episode(std::move(states), std::move(taken));
    used.push_back({b, m});
  }
  json policies = json::array();
  for (const auto& b : behaviors) policies.push_back(b);
  data.provenance = {{"kind", "compliant"},
                     {"seed", seed},
                     {"behaviors", std::move(policies)},
                     {"episode_policy", std::move(used)}};
  return data;
}

TrajectoryDataset collect_compliant(const TabularMDP& mdp, const Policy& behavior,
                                    std::size_t episodes, std::uint64_t seed) {
  return collect_compliant(mdp, {MixturePolicy{{behavior}}}, episodes, seed);
}

PessimisticPlan pessimistic_plan(const TrajectoryDataset& data, const RewardTable& rewards,
                                 double beta_offline) {
  if (!(beta_offline > 0.0)) throw DataError("beta' must be positive");
  const std::size_t H = data.horizon();
  const std::size_t S = data.num_states();
  if (rewards.size() != H) throw DataError("reward table horizon mismatch");
  PessimisticPlan out;
  out.values.q.assign(H, StageTable());
  out.values.v.assign(H + 1, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(S)));
  out.gamma.assign(H, StageTable());
  out.policy.actions.assign(H, std::vector<std::size_t>(S, 0));
  for (std::size_t h = H; h-- > 0;) {
    const auto A = data.num_actions(h);
    if (rewards[h].size() != static_cast<Eigen::Index>(S * A)) {
      throw DataError("reward table shape mismatch at stage " + std::to_string(h));
    }
    const Eigen::VectorXd& n = data.visits(h);
    StageTable gamma = beta_offline * (n.array() + 1.0).rsqrt().matrix();
    StageTable pv(n.size());
    const auto& c = data.transition_counts(h);
    const auto& v_next = out.values.v[h + 1];
    for (Eigen::Index p = 0; p < n.size(); ++p) {
      pv[p] = n[p] > 0.0 ? c.row(p).dot(v_next) / n[p] : v_next.mean();
    }
    StageTable q = (rewards[h] + pv - 2.0 * gamma).cwiseMax(0.0).cwiseMin(static_cast<double>(H - h));
    for (std::size_t s = 0; s < S; ++s) {
      const auto a = argmax_action(q, s, A);
      out.policy.actions[h][s] = a;
      out.values.v[h][static_cast<Eigen::Index>(s)] = q[static_cast<Eigen::Index>(s * A + a)];
    }
    out.values.q[h] = std::move(q);
    out.gamma[h] = std::move(gamma);
  }
  return out;
}

LcbviResult lcbvi(const TrajectoryDataset& data, const FeatureMap& features,
                  FeedbackOracle& oracle, double margin, double delta,
                  const OfflineConfig& config,
                  const std::vector<std::vector<std::string>>& describe) {
  if (data.episodes() == 0) throw DataError("offline planning needs at least one episode");
  if (features.num_states() != data.num_states() ||
      features.actions_per_stage() != data.actions_per_stage()) {
    throw DataError("feature map shape does not match the dataset");
  }
  const std::size_t H = data.horizon();
  const std::size_t before = oracle.calls();
  LcbviResult out;
  out.reward.levels = config.reward.levels;
  for (std::size_t h = 0; h < H; ++h) {
    std::vector<PoolItem> items;
    for (std::size_t k = 0; k < data.episodes(); ++k) {
      items.push_back({data.state(k, h), data.action(k, h)});
    }
    RewardLearningConfig rc = config.reward;
    rc.seed = derive_seed(config.reward.seed, h);
    out.stages.push_back(learn_reward(make_pool(h, std::move(items), features, describe), oracle,
                                      margin, delta / (2.0 * static_cast<double>(H)), rc));
    out.reward.stages.push_back(out.stages.back().rounded);
  }
  out.oracle_calls = oracle.calls() - before;
  out.reward_levels = out.reward.levels_table(features);
  const RewardTable rewards = levels_to_rewards(out.reward_levels, out.reward.levels);
  out.plan = pessimistic_plan(data, rewards, config.bonus.beta_tbl_offline);
  return out;
}

double optimal_coverage(const TrajectoryDataset& data, const TabularMDP& mdp) {
  if (data.num_states() != mdp.num_states() ||
      data.actions_per_stage() != mdp.actions_per_stage()) {
    throw DataError("dataset shape does not match the MDP");
  }
  const auto star = dp_optimal(mdp).policy;
  const auto S = static_cast<Eigen::Index>(mdp.num_states());
  Eigen::VectorXd occupancy = Eigen::VectorXd::Zero(S);
  occupancy[static_cast<Eigen::Index>(mdp.initial_state())] = 1.0;
  double total = 0.0;
  for (std::size_t h = 0; h < mdp.horizon(); ++h) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(S);
    for (Eigen::Index s = 0; s < S; ++s) {
      if (occupancy[s] == 0.0) continue;
      const auto a = star(h, static_cast<std::size_t>(s));
      const auto p = static_cast<Eigen::Index>(mdp.pair_index(h, static_cast<std::size_t>(s), a));
      total += occupancy[s] / std::sqrt(data.visits(h)[p] + 1.0);
      next += occupancy[s] * mdp.transition_row(h, static_cast<std::size_t>(s), a).transpose();
    }
    occupancy = std::move(next);
  }
  return total;
}

double gap_bound(const TrajectoryDataset& data, const TabularMDP& mdp, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DataError("delta must lie in (0, 1)");
  const double S = static_cast<double>(mdp.num_states());
  const double A = static_cast<double>(mdp.max_actions());
  const double H = static_cast<double>(mdp.horizon());
  const double K = static_cast<double>(std::max<std::size_t>(data.episodes(), 1));
  return 2.0 * H * std::sqrt(S * std::log(S * A * H * K / delta)) * optimal_coverage(data, mdp);
}

}  // namespace hitl
