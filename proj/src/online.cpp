#include "hitl/online.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "hitl/errors.hpp"

namespace hitl {

EnvironmentSampler::EnvironmentSampler(const TabularMDP& mdp, std::uint64_t seed)
    : mdp_(&mdp), rng_(seed) {}

std::size_t EnvironmentSampler::reset() {
  stage_ = 0;
  state_ = mdp_->initial_state();
  running_ = true;
  return state_;
}

std::size_t EnvironmentSampler::step(std::size_t action) {
  if (!running_) throw DataError("step() called outside an episode; call reset() first");
  if (action >= mdp_->num_actions(stage_)) {
    throw DataError("action " + std::to_string(action) + " invalid at stage " +
                    std::to_string(stage_));
  }
  state_ = sample_index(mdp_->transition_row(stage_, state_, action), rng_);
  ++steps_;
  if (++stage_ == mdp_->horizon()) running_ = false;
  return state_;
}

std::string to_string(Variant variant) {
  return variant == Variant::tabular ? "tabular" : "linear";
}

Variant variant_from_string(const std::string& name) {
  if (name == "tabular") return Variant::tabular;
  if (name == "linear") return Variant::linear;
  throw DataError("unknown variant " + name);
}

void BonusConfig::validate() const {
  if (!(beta_lin > 0.0 && beta_tbl > 0.0 && beta_tbl_offline > 0.0 && c_explore > 0.0)) {
    throw DataError("bonus constants must be positive");
  }
}

BonusConfig theory_bonus_config(const BonusScale& sc, double c) {
  if (!(c > 0.0)) throw DataError("bonus scale C must be positive");
  if (!(sc.delta > 0.0 && sc.delta < 1.0)) throw DataError("delta must lie in (0, 1)");
  if (!(sc.margin > 0.0)) throw DataError("margin must be positive");
  const double S = static_cast<double>(sc.num_states);
  const double A = static_cast<double>(sc.num_actions);
  const double H = static_cast<double>(sc.horizon);
  const double K = static_cast<double>(std::max<std::size_t>(sc.episodes, 1));
  const double d = static_cast<double>(sc.dim);
  const double iota = std::log(S * A * H * K / sc.delta);
  BonusConfig out;
  out.beta_lin = c * d * H * std::sqrt(sc.dim_f * std::log(d * H * K / (sc.delta * sc.margin)));
  out.beta_tbl = c * H * std::sqrt(iota);
  out.beta_tbl_offline = c * H * std::sqrt(S * iota);
  out.c_explore = c;
  return out;
}

namespace {

Eigen::MatrixXd empirical_rows(const Eigen::MatrixXd& counts, const Eigen::VectorXd& visits) {
  Eigen::MatrixXd p(counts.rows(), counts.cols());
  const double uniform = 1.0 / static_cast<double>(counts.cols());
  for (Eigen::Index r = 0; r < counts.rows(); ++r) {
    if (visits[r] > 0.0) {
      p.row(r) = counts.row(r) / visits[r];
    } else {
      p.row(r).setConstant(uniform);
    }
  }
  return p;
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m) {
  return m.llt().solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

// Running sufficient statistics over a growing prefix of the dataset.
struct PrefixStats {
  PrefixStats(std::size_t S, const std::vector<std::size_t>& actions, const FeatureMap* features)
      : num_states(S), actions(actions), features(features) {
    for (auto a : actions) {
      const auto pairs = static_cast<Eigen::Index>(S * a);
      visits.push_back(Eigen::VectorXd::Zero(pairs));
      counts.push_back(Eigen::MatrixXd::Zero(pairs, static_cast<Eigen::Index>(S)));
      if (features) {
        const auto d = static_cast<Eigen::Index>(features->dim());
        gram.push_back(Eigen::MatrixXd::Identity(d, d));
        gram_inv.push_back(Eigen::MatrixXd::Identity(d, d));
      }
    }
    history.resize(actions.size());
  }

  void add(const std::vector<std::size_t>& states, const std::vector<std::size_t>& taken) {
    for (std::size_t h = 0; h < actions.size(); ++h) {
      const auto p = states[h] * actions[h] + taken[h];
      visits[h][static_cast<Eigen::Index>(p)] += 1.0;
      counts[h](static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(states[h + 1])) += 1.0;
      history[h].push_back({p, states[h + 1]});
      if (features) {
        const Eigen::VectorXd phi =
            features->stage(h).row(static_cast<Eigen::Index>(p)).transpose();
        gram[h].noalias() += phi * phi.transpose();
        gram_inv[h] = spd_inverse(gram[h]);
      }
    }
  }

  StageTable pv(std::size_t h, const Eigen::VectorXd& v_next) const {
    if (!features) {
      StageTable out(visits[h].size());
      const double mean = v_next.mean();
      for (Eigen::Index r = 0; r < out.size(); ++r) {
        out[r] = visits[h][r] > 0.0 ? counts[h].row(r).dot(v_next) / visits[h][r] : mean;
      }
      return out;
    }
    const auto& table = features->stage(h);
    Eigen::VectorXd target = Eigen::VectorXd::Zero(table.cols());
    for (const auto& [p, next] : history[h]) {
      target += table.row(static_cast<Eigen::Index>(p)).transpose() *
                v_next[static_cast<Eigen::Index>(next)];
    }
    const Eigen::VectorXd w = gram_inv[h] * target;
    return table * w;
  }

  StageTable gamma(std::size_t h, const BonusConfig& cfg, double H) const {
    if (!features) return optimism_bonus_tabular(visits[h], cfg.beta_tbl, H);
    return optimism_bonus_linear(features->stage(h), gram_inv[h], cfg.beta_lin, H);
  }

  std::size_t num_states;
  std::vector<std::size_t> actions;
  const FeatureMap* features;
  std::vector<Eigen::VectorXd> visits;
  std::vector<Eigen::MatrixXd> counts;
  std::vector<Eigen::MatrixXd> gram;
  std::vector<Eigen::MatrixXd> gram_inv;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> history;
};

// One clipped backward pass: Q_h = clip(r_h + PV_{h+1} + bonus_h, 0, H - h).
template <class Bonus>
void backward_pass(const PrefixStats& stats, const RewardTable* rewards, Bonus&& bonus_of,
                   Policy& policy, ValueTables& values) {
  const std::size_t H = stats.actions.size();
  const std::size_t S = stats.num_states;
  values.q.assign(H, StageTable());
  values.v.assign(H + 1, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(S)));
  policy.actions.assign(H, std::vector<std::size_t>(S, 0));
  for (std::size_t h = H; h-- > 0;) {
    StageTable q = stats.pv(h, values.v[h + 1]) + bonus_of(h);
    if (rewards) q += (*rewards)[h];
    q = q.cwiseMax(0.0).cwiseMin(static_cast<double>(H - h));
    const auto A = stats.actions[h];
    for (std::size_t s = 0; s < S; ++s) {
      const auto a = argmax_action(q, s, A);
      policy.actions[h][s] = a;
      values.v[h][static_cast<Eigen::Index>(s)] = q[static_cast<Eigen::Index>(s * A + a)];
    }
    values.q[h] = std::move(q);
  }
}

void check_linear(Variant variant, const FeatureMap* features, std::size_t S,
                  const std::vector<std::size_t>& actions) {
  if (variant != Variant::linear) return;
  if (!features) throw DataError("the linear variant needs a feature map");
  if (features->num_states() != S || features->actions_per_stage() != actions) {
    throw DataError("feature map shape does not match the environment");
  }
}

}  // namespace

Eigen::MatrixXd estimate_p_tabular(const TrajectoryDataset& data, std::size_t h) {
  return empirical_rows(data.transition_counts(h), data.visits(h));
}

StageTable estimate_pv_linear(const TrajectoryDataset& data, const FeatureMap& features,
                              std::size_t h, const Eigen::VectorXd& v_next, std::size_t upto) {
  const auto& table = features.stage(h);
  const std::size_t n = std::min(upto, data.episodes());
  Eigen::VectorXd target = Eigen::VectorXd::Zero(table.cols());
  for (std::size_t k = 0; k < n; ++k) {
    target += table.row(static_cast<Eigen::Index>(data.pair(k, h))).transpose() *
              v_next[static_cast<Eigen::Index>(data.state(k, h + 1))];
  }
  const Eigen::VectorXd w = data.gram(h, features, n).llt().solve(target);
  return table * w;
}

StageTable optimism_bonus_tabular(const Eigen::VectorXd& visits, double beta, double horizon) {
  StageTable out(visits.size());
  for (Eigen::Index i = 0; i < visits.size(); ++i) {
    out[i] = visits[i] > 0.0 ? std::min(beta / std::sqrt(visits[i]), horizon) : horizon;
  }
  return out;
}

StageTable optimism_bonus_linear(const Eigen::MatrixXd& stage_features,
                                 const Eigen::MatrixXd& gram_inverse, double beta,
                                 double horizon) {
  const Eigen::MatrixXd m = stage_features * gram_inverse;
  StageTable out(stage_features.rows());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double quad = std::max(0.0, m.row(i).dot(stage_features.row(i)));
    out[i] = std::min(beta * std::sqrt(quad), horizon);
  }
  return out;
}

StageTable exploration_bonus_tabular(const Eigen::VectorXd& visits, const StageTable& gamma,
                                     double c_explore, double horizon, std::size_t num_states) {
  StageTable out(visits.size());
  const double scale = c_explore * horizon * horizon * static_cast<double>(num_states);
  for (Eigen::Index i = 0; i < visits.size(); ++i) {
    out[i] = visits[i] > 0.0 ? scale / visits[i] + 2.0 * gamma[i] : horizon;
  }
  return out;
}

StageTable optimism_bonus(const TrajectoryDataset& data, std::size_t h, const BonusConfig& config,
                          const FeatureMap* features) {
  const double H = static_cast<double>(data.horizon());
  if (!features) return optimism_bonus_tabular(data.visits(h), config.beta_tbl, H);
  return optimism_bonus_linear(features->stage(h), spd_inverse(data.gram(h, *features)),
                               config.beta_lin, H);
}

StageTable exploration_bonus(const TrajectoryDataset& data, std::size_t h,
                             const BonusConfig& config, const FeatureMap* features) {
  const StageTable gamma = optimism_bonus(data, h, config, features);
  if (features) return exploration_bonus_linear(gamma);
  return exploration_bonus_tabular(data.visits(h), gamma, config.c_explore,
                                   static_cast<double>(data.horizon()), data.num_states());
}

TrajectoryDataset explore(EnvironmentSampler& env, std::size_t episodes,
                          const ExploreOptions& options, const FeatureMap* features) {
  options.bonus.validate();
  const auto S = env.num_states();
  const auto& actions = env.actions_per_stage();
  check_linear(options.variant, features, S, actions);
  const FeatureMap* fm = options.variant == Variant::linear ? features : nullptr;

  TrajectoryDataset data(S, actions);
  PrefixStats stats(S, actions, fm);
  const std::size_t H = actions.size();
  const double Hd = static_cast<double>(H);
  Policy policy;
  ValueTables values;
  for (std::size_t k = 0; k < episodes; ++k) {
    auto bonus_of = [&](std::size_t h) {
      const StageTable gamma = stats.gamma(h, options.bonus, Hd);
      if (fm) return exploration_bonus_linear(gamma);
      return exploration_bonus_tabular(stats.visits[h], gamma, options.bonus.c_explore, Hd, S);
    };
    backward_pass(stats, nullptr, bonus_of, policy, values);

    std::vector<std::size_t> states{env.reset()};
    std::vector<std::size_t> taken;
    for (std::size_t h = 0; h < H; ++h) {
      taken.push_back(policy(h, states.back()));
      states.push_back(env.step(taken.back()));
    }
    stats.add(states, taken);
    data.add_episode(std::move(states), std::move(taken));
  }
  data.provenance = {{"kind", "explore"},
                     {"variant", to_string(options.variant)},
                     {"episodes", episodes},
                     {"bonus",
                      {{"beta_lin", options.bonus.beta_lin},
                       {"beta_tbl", options.bonus.beta_tbl},
                       {"c_explore", options.bonus.c_explore}}}};
  return data;
}

PlanningPasses planning_passes(const TrajectoryDataset& data, const RewardTable& rewards,
                               const BonusConfig& bonus, Variant variant,
                               const FeatureMap* features, bool keep_values) {
  bonus.validate();
  const auto S = data.num_states();
  const auto& actions = data.actions_per_stage();
  check_linear(variant, features, S, actions);
  if (rewards.size() != actions.size()) throw DataError("reward table horizon mismatch");
  for (std::size_t h = 0; h < actions.size(); ++h) {
    if (rewards[h].size() != static_cast<Eigen::Index>(S * actions[h])) {
      throw DataError("reward table shape mismatch at stage " + std::to_string(h));
    }
  }
  if (data.episodes() == 0) throw DataError("planning needs at least one episode");
  const FeatureMap* fm = variant == Variant::linear ? features : nullptr;

  PrefixStats stats(S, actions, fm);
  const double Hd = static_cast<double>(actions.size());
  PlanningPasses out;
  out.policy.members.reserve(data.episodes());
  for (std::size_t k = 0; k < data.episodes(); ++k) {
    Policy policy;
    ValueTables values;
    backward_pass(stats, &rewards, [&](std::size_t h) { return stats.gamma(h, bonus, Hd); },
                  policy, values);
    out.policy.members.push_back(std::move(policy));
    if (keep_values) out.values.push_back(values);
    out.last = std::move(values);

    std::vector<std::size_t> states;
    std::vector<std::size_t> taken;
    for (std::size_t h = 0; h <= actions.size(); ++h) states.push_back(data.state(k, h));
    for (std::size_t h = 0; h < actions.size(); ++h) taken.push_back(data.action(k, h));
    stats.add(states, taken);
  }
  return out;
}

PlanResult plan(const TrajectoryDataset& data, const FeatureMap& features, FeedbackOracle& oracle,
                double margin, double delta, const PlanConfig& config,
                const std::vector<std::vector<std::string>>& describe) {
  if (data.episodes() == 0) throw DataError("planning needs at least one episode");
  if (features.num_states() != data.num_states() ||
      features.actions_per_stage() != data.actions_per_stage()) {
    throw DataError("feature map shape does not match the dataset");
  }
  const std::size_t H = data.horizon();
  const std::size_t before = oracle.calls();
  PlanResult out;
  out.reward.levels = config.reward.levels;
  Rng action_rng(config.seed);
  for (std::size_t h = 0; h < H; ++h) {
    std::vector<PoolItem> items;
    items.reserve(data.episodes());
    for (std::size_t k = 0; k < data.episodes(); ++k) {
      std::size_t a = data.action(k, h);
      if (config.variant == Variant::linear) {
        a = std::uniform_int_distribution<std::size_t>(0, data.num_actions(h) - 1)(action_rng);
      }
      items.push_back({data.state(k, h), a});
    }
    out.pools.push_back(make_pool(h, std::move(items), features, describe));
    RewardLearningConfig rc = config.reward;
    rc.seed = derive_seed(config.reward.seed, h);
    const double stage_delta = delta / (2.0 * static_cast<double>(H));
    out.stages.push_back(config.validate
                             ? learn_reward_validated(out.pools.back(), oracle, margin,
                                                      stage_delta, rc)
                             : learn_reward(out.pools.back(), oracle, margin, stage_delta, rc));
    out.reward.stages.push_back(out.stages.back().rounded);
  }
  out.oracle_calls = oracle.calls() - before;

  out.reward_levels = out.reward.levels_table(features);
  const RewardTable rewards = levels_to_rewards(out.reward_levels, out.reward.levels);
  out.passes = planning_passes(data, rewards, config.bonus, config.variant, &features,
                               config.keep_values);
  out.policy = out.passes.policy;
  return out;
}

BestIterate best_iterate(const TabularMDP& mdp, const MixturePolicy& policy) {
  if (policy.members.empty()) throw DataError("mixture policy has no members");
  BestIterate best{0, dp_evaluate(mdp, policy.members[0])};
  for (std::size_t i = 1; i < policy.members.size(); ++i) {
    const double v = dp_evaluate(mdp, policy.members[i]);
    if (v > best.value) best = {i, v};
  }
  return best;
}

}  // namespace hitl
