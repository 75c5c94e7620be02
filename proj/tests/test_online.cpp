#include <cmath>

#include <gtest/gtest.h>

#include "hitl/env.hpp"
#include "hitl/errors.hpp"
#include "hitl/online.hpp"
#include "support.hpp"

using namespace hitl;

namespace {

// Stage 0 from state 0: action 0 stays, action 1 moves to state 1. Stage 1 is
// uniform.
TabularMDP gated_chain() {
  Eigen::MatrixXd p0(4, 2), p1 = Eigen::MatrixXd::Constant(4, 2, 0.5);
  p0 << 1, 0, 0, 1, 1, 0, 0, 1;
  return TabularMDP(2, {2, 2}, {p0, p1}, {{0, 0, 0, 0}, {0, 0, 0, 1}}, 1, 0);
}

BonusConfig unit_bonus() {
  BonusConfig b;
  b.beta_lin = b.beta_tbl = b.beta_tbl_offline = b.c_explore = 1.0;
  return b;
}

FeatureMap one_hot(const TabularMDP& mdp) {
  std::vector<Eigen::MatrixXd> tables;
  for (std::size_t h = 0; h < mdp.horizon(); ++h) {
    const auto n = static_cast<Eigen::Index>(mdp.num_pairs(h));
    tables.push_back(Eigen::MatrixXd::Identity(n, n));
  }
  return FeatureMap(mdp.num_states(), mdp.actions_per_stage(), tables);
}

}  // namespace

TEST(Sampler, CountsStepsAndEnforcesEpisodes) {
  const auto mdp = gated_chain();
  EnvironmentSampler env(mdp, 1);
  EXPECT_THROW(env.step(0), DataError);
  EXPECT_EQ(env.reset(), 0u);
  EXPECT_EQ(env.step(1), 1u);
  EXPECT_THROW(env.step(2), DataError);
  env.step(0);
  EXPECT_THROW(env.step(0), DataError);
  EXPECT_EQ(env.steps(), 2u);
}

TEST(EstimateP, CountsGiveEmpiricalRows) {
  TrajectoryDataset data(3, {1});
  data.add_episode({0, 0}, {0});
  data.add_episode({0, 0}, {0});
  data.add_episode({0, 1}, {0});
  const auto p = estimate_p_tabular(data, 0);
  EXPECT_NEAR(p(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p(0, 1), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(p(0, 2), 0.0);
  for (Eigen::Index s = 0; s < 3; ++s) {
    EXPECT_DOUBLE_EQ(p(1, s), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(p(2, s), 1.0 / 3.0);
  }
}

TEST(EstimateP, RowsSumToOneAfterExploration) {
  const auto mdp = hitl::testing::random_mdp(5, {3, 2}, 1, 4);
  EnvironmentSampler env(mdp, 2);
  const auto data = explore(env, 30, {Variant::tabular, unit_bonus()});
  for (std::size_t h = 0; h < 2; ++h) {
    const auto p = estimate_p_tabular(data, h);
    EXPECT_TRUE(p.rowwise().sum().isApprox(Eigen::VectorXd::Ones(p.rows()), 1e-12));
    EXPECT_GE(p.minCoeff(), 0.0);
  }
}

TEST(EstimatePV, ZeroValueAndNoDataGiveZero) {
  const auto mdp = hitl::testing::random_mdp(4, {2}, 1, 1);
  const auto features = gen_features(4, {2}, 3, 2);
  TrajectoryDataset empty(4, {2});
  EXPECT_TRUE(estimate_pv_linear(empty, features, 0, Eigen::VectorXd::Constant(4, 0.7)).isZero());
  EnvironmentSampler env(mdp, 3);
  const auto data = explore(env, 20, {Variant::tabular, unit_bonus()});
  EXPECT_TRUE(estimate_pv_linear(data, features, 0, Eigen::VectorXd::Zero(4)).isZero());
}

TEST(EstimatePV, TwoSampleNormalEquations) {
  // phi(0) = (1, 0), phi(1) = (0.6, 0.8); samples 0 -> 0 and 1 -> 1 with
  // V = (1, 2). Lambda = [[2.36, 0.48], [0.48, 1.64]], target = (2.2, 1.6),
  // det = 3.64, w = (2.84, 2.72) / 3.64.
  Eigen::MatrixXd table(2, 2);
  table << 1.0, 0.0, 0.6, 0.8;
  const FeatureMap features(2, {1}, {table});
  TrajectoryDataset data(2, {1});
  data.add_episode({0, 0}, {0});
  data.add_episode({1, 1}, {0});
  const auto pv = estimate_pv_linear(data, features, 0, Eigen::Vector2d(1.0, 2.0));
  EXPECT_NEAR(pv[0], 2.84 / 3.64, 1e-10);
  EXPECT_NEAR(pv[1], 3.88 / 3.64, 1e-10);
}

TEST(Bonus, TabularOptimism) {
  Eigen::VectorXd visits(3);
  visits << 4.0, 0.0, 1e-2;
  const auto gamma = optimism_bonus_tabular(visits, 2.0, 10.0);
  EXPECT_DOUBLE_EQ(gamma[0], 1.0);
  EXPECT_DOUBLE_EQ(gamma[1], 10.0);
  EXPECT_DOUBLE_EQ(gamma[2], 10.0);
}

TEST(Bonus, TabularExploration) {
  Eigen::VectorXd visits(2);
  visits << 16.0, 0.0;
  Eigen::VectorXd gamma(2);
  gamma << 0.5, 2.0;
  const auto b = exploration_bonus_tabular(visits, gamma, 1.0, 2.0, 4);
  EXPECT_DOUBLE_EQ(b[0], 2.0);
  EXPECT_DOUBLE_EQ(b[1], 2.0);
}

TEST(Bonus, LinearExplorationTriplesGamma) {
  const Eigen::VectorXd gamma = Eigen::VectorXd::Constant(3, 0.2);
  EXPECT_TRUE(exploration_bonus_linear(gamma).isApprox(Eigen::VectorXd::Constant(3, 0.6)));
}

TEST(Bonus, EmptyLinearDatasetGivesBetaCappedAtH) {
  Eigen::MatrixXd table(2, 2);
  table << 1.0, 0.0, 0.6, 0.8;
  const FeatureMap features(2, {1, 1}, {table, table});
  TrajectoryDataset empty(2, {1, 1});
  auto cfg = unit_bonus();
  cfg.beta_lin = 0.7;
  EXPECT_TRUE(optimism_bonus(empty, 0, cfg, &features).isApprox(Eigen::Vector2d(0.7, 0.7)));
  cfg.beta_lin = 5.0;
  EXPECT_TRUE(optimism_bonus(empty, 1, cfg, &features).isApprox(Eigen::Vector2d(2.0, 2.0)));
}

TEST(Bonus, ExplorationDominatesOptimismAndStaysCapped) {
  const auto mdp = hitl::testing::random_mdp(6, {3, 3}, 1, 8);
  const auto features = gen_features(6, {3, 3}, 4, 1);
  EnvironmentSampler env(mdp, 5);
  const auto data = explore(env, 60, {Variant::tabular, unit_bonus()});
  for (const FeatureMap* fm : {static_cast<const FeatureMap*>(nullptr), &features}) {
    for (std::size_t h = 0; h < 2; ++h) {
      const auto gamma = optimism_bonus(data, h, unit_bonus(), fm);
      const auto b = exploration_bonus(data, h, unit_bonus(), fm);
      EXPECT_LE(gamma.maxCoeff(), 2.0);
      EXPECT_GE(gamma.minCoeff(), 0.0);
      EXPECT_TRUE(((b - gamma).array() >= 0.0).all());
    }
  }
}

TEST(Bonus, TheoryConstants) {
  BonusScale sc;
  sc.num_states = 20;
  sc.num_actions = 10;
  sc.horizon = 2;
  sc.episodes = 2000;
  sc.delta = 0.1;
  sc.margin = 0.05;
  sc.dim = 5;
  sc.dim_f = 5.0;
  const auto cfg = theory_bonus_config(sc, 0.5);
  const double iota = std::log(20.0 * 10 * 2 * 2000 / 0.1);
  EXPECT_NEAR(cfg.beta_tbl, 0.5 * 2 * std::sqrt(iota), 1e-12);
  EXPECT_NEAR(cfg.beta_tbl_offline, 0.5 * 2 * std::sqrt(20 * iota), 1e-12);
  EXPECT_NEAR(cfg.beta_lin, 0.5 * 5 * 2 * std::sqrt(5.0 * std::log(5.0 * 2 * 2000 / (0.1 * 0.05))),
              1e-12);
  EXPECT_DOUBLE_EQ(cfg.c_explore, 0.5);
  BonusConfig bad = cfg;
  bad.beta_tbl = 0.0;
  EXPECT_THROW(bad.validate(), DataError);
}

TEST(Explore, FirstEpisodeIsGreedyOnBonusesAlone) {
  const auto mdp = hitl::testing::random_mdp(5, {4, 3}, 1, 2);
  EnvironmentSampler env(mdp, 7);
  const auto data = explore(env, 1, {Variant::tabular, unit_bonus()});
  // Every pair is unvisited, so all Q-bar ties at H - h and the lowest action wins.
  EXPECT_EQ(data.action(0, 0), 0u);
  EXPECT_EQ(data.action(0, 1), 0u);
  EXPECT_EQ(env.steps(), 2u);
}

TEST(Explore, StepCountAndProvenance) {
  const auto mdp = hitl::testing::random_mdp(6, {3, 2}, 1, 3);
  for (auto variant : {Variant::tabular, Variant::linear}) {
    const auto features = gen_features(6, {3, 2}, 3, 4);
    EnvironmentSampler env(mdp, 1);
    const auto data = explore(env, 40, {variant, unit_bonus()}, &features);
    EXPECT_EQ(data.episodes(), 40u);
    EXPECT_EQ(env.steps(), 80u);
    EXPECT_EQ(data.provenance.at("variant"), to_string(variant));
  }
}

TEST(Explore, LinearNeedsMatchingFeatures) {
  const auto mdp = hitl::testing::random_mdp(4, {2, 2}, 1, 3);
  EnvironmentSampler env(mdp, 1);
  EXPECT_THROW(explore(env, 5, {Variant::linear, unit_bonus()}), DataError);
  const auto wrong = gen_features(5, {2, 2}, 3, 1);
  EXPECT_THROW(explore(env, 5, {Variant::linear, unit_bonus()}, &wrong), DataError);
}

TEST(Explore, BonusDrivesCoverageOfGatedState) {
  const auto mdp = gated_chain();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (std::size_t K : {100, 400, 1600}) {
      EnvironmentSampler env(mdp, seed);
      const auto data = explore(env, K, {Variant::tabular, unit_bonus()});
      const double reached = data.visits(1)[2] + data.visits(1)[3];
      EXPECT_GT(reached / static_cast<double>(K), 0.25) << "K=" << K << " seed=" << seed;
    }
  }
}

TEST(Plan, PassValuesStayInClippedRange) {
  const auto mdp = hitl::testing::random_mdp(5, {3, 3, 2}, 2, 6);
  EnvironmentSampler env(mdp, 3);
  const auto data = explore(env, 50, {Variant::tabular, unit_bonus()});
  const auto passes =
      planning_passes(data, mdp.reward_table(), unit_bonus(), Variant::tabular, nullptr, true);
  ASSERT_EQ(passes.values.size(), 50u);
  EXPECT_EQ(passes.policy.members.size(), 50u);
  for (const auto& v : passes.values) {
    for (std::size_t h = 0; h < 3; ++h) {
      EXPECT_GE(v.q[h].minCoeff(), 0.0);
      EXPECT_LE(v.q[h].maxCoeff(), static_cast<double>(3 - h));
    }
    EXPECT_TRUE(v.v[3].isZero());
  }
  // The first pass sees no data: every Q equals H - h.
  for (std::size_t h = 0; h < 3; ++h) {
    EXPECT_TRUE(passes.values[0].q[h].isApprox(
        Eigen::VectorXd::Constant(passes.values[0].q[h].size(), 3.0 - h)));
  }
}

TEST(Plan, OptimismOnVisitedPairs) {
  int optimistic = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto mdp = hitl::testing::random_mdp(4, {3, 2}, 2, 1000 + seed);
    EnvironmentSampler env(mdp, seed);
    BonusScale sc{4, 3, 2, 200, 0.05, 0.1, 1, 2.0};
    const auto bonus = theory_bonus_config(sc);
    const auto data = explore(env, 200, {Variant::tabular, bonus});
    const auto rewards = mdp.reward_table();
    const auto star = dp_optimal(mdp, rewards).values;
    const auto passes =
        planning_passes(data, rewards, bonus, Variant::tabular, nullptr, true);
    bool ok = true;
    TrajectoryDataset seen(4, {3, 2});
    for (std::size_t k = 0; k < passes.values.size() && ok; ++k) {
      for (std::size_t h = 0; h < 2; ++h) {
        for (Eigen::Index p = 0; p < seen.visits(h).size(); ++p) {
          if (seen.visits(h)[p] > 0.0 && passes.values[k].q[h][p] < star.q[h][p] - 1e-12) ok = false;
        }
      }
      std::vector<std::size_t> s, a;
      for (std::size_t h = 0; h <= 2; ++h) s.push_back(data.state(k, h));
      for (std::size_t h = 0; h < 2; ++h) a.push_back(data.action(k, h));
      seen.add_episode(s, a);
    }
    optimistic += ok ? 1 : 0;
  }
  EXPECT_GE(optimistic, 95);
}

TEST(Plan, ExactRewardMixtureIsNearOptimal) {
  const auto mdp = hitl::testing::random_mdp(3, {2, 2}, 4, 21);
  EnvironmentSampler env(mdp, 4);
  auto bonus = unit_bonus();
  bonus.beta_tbl = 0.3;
  const auto data = explore(env, 4000, {Variant::tabular, bonus});
  const auto passes = planning_passes(data, mdp.reward_table(), bonus, Variant::tabular);
  const double gap = dp_optimal(mdp).values.v[0][0] - dp_evaluate(mdp, passes.policy);
  EXPECT_GE(gap, -1e-12);
  EXPECT_LE(gap, 0.05);
  EXPECT_GE(best_iterate(mdp, passes.policy).value, dp_evaluate(mdp, passes.policy) - 1e-12);
}

TEST(Plan, OneHotLinearAgreesWithTabular) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto mdp = hitl::testing::random_mdp(3, {2, 2}, 4, 40 + seed);
    const auto features = one_hot(mdp);
    EnvironmentSampler env(mdp, seed);
    auto bonus = unit_bonus();
    bonus.beta_tbl = bonus.beta_lin = 0.3;
    const auto data = explore(env, 3000, {Variant::tabular, bonus});
    const auto tbl = planning_passes(data, mdp.reward_table(), bonus, Variant::tabular);
    const auto lin = planning_passes(data, mdp.reward_table(), bonus, Variant::linear, &features);
    EXPECT_NEAR(dp_evaluate(mdp, tbl.policy), dp_evaluate(mdp, lin.policy), 0.02) << seed;
  }
}

TEST(Plan, QueryBookkeeping) {
  EnvConfig cfg;
  cfg.num_states = 10;
  cfg.actions = {4, 3};
  cfg.dim = 3;
  cfg.margin = 0.1;
  const auto bundle = gen_env(cfg, 2);
  EnvironmentSampler env(bundle.mdp, 1);
  const auto data = explore(env, 150, {Variant::tabular, unit_bonus()});
  EXPECT_EQ(env.steps(), 300u);
  for (auto variant : {Variant::tabular, Variant::linear}) {
    SimulatedOracle oracle(bundle.model, 1, 9);
    PlanConfig pc;
    pc.variant = variant;
    pc.bonus = unit_bonus();
    pc.reward.budget = 40;
    const auto result = plan(data, bundle.features, oracle, 0.1, 0.1, pc);
    EXPECT_EQ(result.stages.size(), 2u);
    EXPECT_EQ(result.oracle_calls, oracle.calls());
    EXPECT_LE(result.oracle_calls, 2u * 40u);
    for (const auto& pool : result.pools) EXPECT_EQ(pool.size(), 150u);
    EXPECT_EQ(result.policy.members.size(), 150u);
    EXPECT_EQ(env.steps(), 300u);
  }
}

TEST(Plan, StageConfidenceIsSplitOverHorizon) {
  EnvConfig cfg;
  cfg.num_states = 8;
  cfg.actions = {3, 3, 3};
  cfg.dim = 3;
  cfg.margin = 0.1;
  const auto bundle = gen_env(cfg, 5);
  EnvironmentSampler env(bundle.mdp, 1);
  const auto data = explore(env, 40, {Variant::tabular, unit_bonus()});
  SimulatedOracle oracle(bundle.model, 1, 3);
  PlanConfig pc;
  pc.bonus = unit_bonus();
  const auto result = plan(data, bundle.features, oracle, 0.3, 0.06, pc);
  for (std::size_t h = 0; h < 3; ++h) {
    EXPECT_EQ(result.stages[h].budget, reward_budget(result.pools[h], 0.3, 0.01, pc.reward));
  }
}

TEST(Plan, RejectsMismatchedInputs) {
  const auto mdp = hitl::testing::random_mdp(4, {2, 2}, 1, 3);
  TrajectoryDataset empty(4, {2, 2});
  SimulatedOracle oracle(ResponseModel{ModelKind::linear, {Eigen::VectorXd::Zero(2)}, ""}, 1, 0);
  const auto features = gen_features(4, {2, 2}, 2, 1);
  EXPECT_THROW(plan(empty, features, oracle, 0.1, 0.1, {}), DataError);
  EXPECT_THROW(planning_passes(empty, mdp.reward_table(), unit_bonus(), Variant::tabular),
               DataError);
  EnvironmentSampler env(mdp, 1);
  const auto data = explore(env, 5, {Variant::tabular, unit_bonus()});
  const auto other = gen_features(5, {2, 2}, 2, 1);
  EXPECT_THROW(plan(data, other, oracle, 0.1, 0.1, {}), DataError);
  RewardTable short_table{mdp.reward_table()[0]};
  EXPECT_THROW(planning_passes(data, short_table, unit_bonus(), Variant::tabular), DataError);
}
