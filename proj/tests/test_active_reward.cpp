#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "hitl/active_reward.hpp"
#include "hitl/env.hpp"
#include "hitl/errors.hpp"
#include "hitl/oracle.hpp"

using namespace hitl;

namespace {

// Answers the true thresholded level with no noise.
class NoiselessOracle : public FeedbackOracle {
 public:
  NoiselessOracle(ResponseModel model, int levels) : FeedbackOracle(levels), model_(std::move(model)) {}

 protected:
  int answer(const Query& q) override { return threshold_level(model_(q.stage, q.feature), levels()); }

 private:
  ResponseModel model_;
};

FeatureMap one_stage(const Eigen::MatrixXd& rows) {
  return FeatureMap(static_cast<std::size_t>(rows.rows()), {1}, {rows});
}

QueryPool replicated_pool(const FeatureMap& features, std::size_t copies) {
  std::vector<PoolItem> items;
  for (std::size_t c = 0; c < copies; ++c) {
    for (std::size_t s = 0; s < features.num_states(); ++s) {
      for (std::size_t a = 0; a < features.num_actions(0); ++a) items.push_back({s, a});
    }
  }
  return make_pool(0, std::move(items), features);
}

bool all_labels_correct(const QueryPool& pool, const RewardLearning& r, const ResponseModel& m,
                        int levels) {
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto phi = pool.feature(i);
    if (threshold_level(r.rounded(phi), levels) != threshold_level(m(0, phi), levels)) return false;
  }
  return true;
}

EnvBundle one_stage_env(std::size_t dim, double margin, int levels, std::uint64_t seed) {
  EnvConfig cfg;
  cfg.num_states = 12;
  cfg.actions = {5};
  cfg.dim = dim;
  cfg.margin = margin;
  cfg.levels = levels;
  return gen_env(cfg, seed);
}

// Alternates 0, 1, 0, 1, ... so that a single repeated point fits to f = 1/2.
class AlternatingOracle : public FeedbackOracle {
 public:
  AlternatingOracle() : FeedbackOracle(1) {}

 protected:
  int answer(const Query&) override { return static_cast<int>(next_++ % 2); }

 private:
  std::size_t next_ = 0;
};

}  // namespace

TEST(Pool, RejectsInvalidItems) {
  const auto f = one_stage(Eigen::MatrixXd::Identity(2, 2));
  EXPECT_THROW(make_pool(0, {{2, 0}}, f), DataError);
  EXPECT_THROW(make_pool(1, {{0, 0}}, f), DataError);
  EXPECT_THROW(make_pool(0, {}, f), DataError);
}

TEST(Pool, QueryCarriesDescription) {
  const auto f = one_stage(Eigen::MatrixXd::Identity(2, 2));
  const auto pool = full_pool(0, f, {{"first", "second"}});
  EXPECT_EQ(pool.query(1).description, "second");
  EXPECT_EQ(pool.query(1).state, 1u);
}

TEST(Select, OrthonormalPoolCoversEachDirectionOnce) {
  const auto pool = full_pool(0, one_stage(Eigen::MatrixXd::Identity(4, 4)));
  auto picked = select_queries(pool, 4, 0.5, ModelKind::linear);
  std::sort(picked.begin(), picked.end());
  EXPECT_EQ(picked, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(Select, SingleQueryTakesLargestNorm) {
  Eigen::MatrixXd rows(4, 3);
  rows << 0.2, 0.1, 0.0, 0.0, 0.7, 0.1, 0.3, 0.3, 0.3, 0.0, 0.0, 0.4;
  EXPECT_EQ(select_queries(full_pool(0, one_stage(rows)), 1, 1.0, ModelKind::linear),
            (std::vector<std::size_t>{1}));
}

TEST(Select, IdenticalFeaturesPickIndexZero) {
  const Eigen::MatrixXd rows = Eigen::MatrixXd::Constant(5, 3, 0.3);
  const auto picked = select_queries(full_pool(0, one_stage(rows)), 7, 0.5, ModelKind::linear);
  EXPECT_EQ(picked, std::vector<std::size_t>(7, 0));
}

TEST(Select, PassiveIsWithoutReplacement) {
  const auto pool = full_pool(0, one_stage(Eigen::MatrixXd::Identity(6, 6)));
  Rng rng(3);
  auto picked = select_passive(pool, 10, rng);
  ASSERT_EQ(picked.size(), 6u);
  std::sort(picked.begin(), picked.end());
  EXPECT_EQ(std::unique(picked.begin(), picked.end()), picked.end());
}

TEST(Learn, NoiselessOracleRecoversEveryLabel) {
  const auto features = one_stage(Eigen::MatrixXd::Identity(4, 4));
  ResponseModel model{ModelKind::linear, {Eigen::Vector4d(0.9, -0.3, 0.2, -0.8)}, ""};
  const auto pool = replicated_pool(features, 10);
  for (auto mode : {SelectionMode::active, SelectionMode::passive}) {
    NoiselessOracle oracle(model, 1);
    RewardLearningConfig rc;
    rc.budget = 24;
    rc.c2 = 0.5;
    rc.selection = mode;
    const auto r = learn_reward(pool, oracle, 0.1, 0.05, rc);
    EXPECT_TRUE(all_labels_correct(pool, r, model, 1));
    EXPECT_EQ(oracle.calls(), 24u);
  }
}

TEST(Learn, OnePointPoolRecoversPositiveLabel) {
  // f* = 1/2 + 2 margin on the only distinct point.
  const double margin = 0.1;
  const double delta = 0.1;
  Eigen::MatrixXd rows(1, 2);
  rows << 1.0, 0.0;
  const auto features = one_stage(rows);
  ResponseModel model{ModelKind::linear, {Eigen::Vector2d(4.0 * margin, 0.0)}, ""};
  ASSERT_NEAR(model(0, rows.row(0).transpose()), 0.5 + 2.0 * margin, 1e-15);
  const auto pool = replicated_pool(features, 5000);
  int correct = 0;
  const int runs = 200;
  for (int t = 0; t < runs; ++t) {
    SimulatedOracle oracle(model, 1, static_cast<std::uint64_t>(t));
    const auto r = learn_reward(pool, oracle, margin, delta);
    ASSERT_LT(r.budget, pool.size());
    correct += threshold_level(r.rounded(pool.feature(0)), 1) == 1;
  }
  EXPECT_GE(correct, static_cast<int>(std::ceil((1.0 - delta) * runs)));
}

TEST(Learn, MarginInstancesRecoverAllLabels) {
  // Smaller companion of the acceptance run: d = 3, margin 0.15.
  int ok = 0;
  const int runs = 20;
  for (int t = 0; t < runs; ++t) {
    const auto env = one_stage_env(3, 0.15, 1, 100 + static_cast<std::uint64_t>(t));
    RewardLearningConfig rc;
    const auto budget = query_budget(3.0, 0.15, 0.05, 1.0);
    const auto pool = replicated_pool(env.features, budget / 60 + 1);
    SimulatedOracle oracle(env.model, 1, static_cast<std::uint64_t>(t));
    const auto r = learn_reward(pool, oracle, 0.15, 0.05, rc);
    EXPECT_EQ(r.budget, budget);
    EXPECT_EQ(oracle.calls(), budget);
    ok += all_labels_correct(pool, r, env.model, 1);
  }
  EXPECT_GE(ok, 19);
}

TEST(Learn, TwoLevelInstancesRecoverAllLabels) {
  int ok = 0;
  for (int t = 0; t < 10; ++t) {
    const auto env = one_stage_env(3, 0.1, 2, 300 + static_cast<std::uint64_t>(t));
    RewardLearningConfig rc;
    rc.levels = 2;
    const auto pool = replicated_pool(env.features, 80);
    SimulatedOracle oracle(env.model, 2, static_cast<std::uint64_t>(t));
    const auto r = learn_reward(pool, oracle, 0.1, 0.05, rc);
    ok += all_labels_correct(pool, r, env.model, 2);
  }
  EXPECT_GE(ok, 9);
}

TEST(Learn, LevelMismatchIsRejected) {
  const auto pool = full_pool(0, one_stage(Eigen::MatrixXd::Identity(2, 2)));
  ResponseModel model{ModelKind::linear, {Eigen::Vector2d(0.5, 0.5)}, ""};
  SimulatedOracle oracle(model, 2, 0);
  EXPECT_THROW(learn_reward(pool, oracle, 0.1, 0.1), DataError);
}

TEST(Validate, ZeroFitAlwaysFails) {
  Eigen::MatrixXd rows(1, 2);
  rows << 0.5, 0.5;
  const auto pool = replicated_pool(one_stage(rows), 10);
  for (double guess : {0.5, 0.1, 0.01}) {
    AlternatingOracle oracle;
    RewardLearningConfig rc;
    rc.budget = 10;
    EXPECT_THROW(learn_reward_validated(pool, oracle, guess, 0.1, rc), ValidationFailure);
  }
}

TEST(Validate, SeparatedFitPasses) {
  // Labels 1 and 0 at phi = +-0.6 fit to w = 1, so f = 0.8 and 0.2.
  Eigen::MatrixXd rows(2, 1);
  rows << 0.6, -0.6;
  const auto pool = replicated_pool(one_stage(rows), 4);
  ResponseModel model{ModelKind::linear, {Eigen::VectorXd::Ones(1)}, ""};
  NoiselessOracle oracle(model, 1);
  RewardLearningConfig rc;
  rc.budget = 4;
  rc.selection = SelectionMode::passive;
  rc.rounding = Rounding::identity;
  const auto r = learn_reward_validated(pool, oracle, 0.2, 0.1, rc);
  EXPECT_NEAR(std::abs(r.fitted(pool.feature(0)) - 0.5), 0.3, 1e-12);
  EXPECT_NEAR(std::abs(r.fitted(pool.feature(1)) - 0.5), 0.3, 1e-12);
}

TEST(Validate, OverlargeGuessFailsMoreOftenThanItPasses) {
  Eigen::MatrixXd rows(2, 2);
  rows << 0.02, 0.0, 0.9, 0.0;
  const auto pool = replicated_pool(one_stage(rows), 200);
  ResponseModel model{ModelKind::linear, {Eigen::Vector2d(1.0, 0.0)}, ""};
  int failed = 0;
  for (int t = 0; t < 100; ++t) {
    SimulatedOracle oracle(model, 1, static_cast<std::uint64_t>(t));
    RewardLearningConfig rc;
    rc.budget = 200;
    try {
      learn_reward_validated(pool, oracle, 0.25, 0.1, rc);
    } catch (const ValidationFailure&) {
      ++failed;
    }
  }
  EXPECT_GT(failed, 100 - failed);
}

TEST(GuessDelta, FirstSuccessUsesOneGuess) {
  std::function<std::optional<int>(double, double)> ok = [](double, double) { return 7; };
  const auto out = guess_delta(ok, 0.2);
  ASSERT_EQ(out.guesses.size(), 1u);
  EXPECT_EQ(out.value, 7);
  EXPECT_DOUBLE_EQ(out.guesses[0].margin, 0.5);
  EXPECT_DOUBLE_EQ(out.guesses[0].delta, 0.1);
}

TEST(GuessDelta, StopsByOneThirtySecondForMarginFiveHundredths) {
  // Margin exactly 0.05 on two replicated points.
  Eigen::MatrixXd rows(2, 2);
  rows << 0.1, 0.0, -0.6, 0.3;
  const auto features = one_stage(rows);
  ResponseModel model{ModelKind::linear, {Eigen::Vector2d(1.0, 0.0)}, ""};
  ASSERT_NEAR(achieved_margin(model, features, 1), 0.05, 1e-12);
  const auto pool = replicated_pool(features, 20000);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SimulatedOracle oracle(model, 1, seed);
    std::size_t budgets = 0;
    std::function<std::optional<RewardLearning>(double, double)> pipeline =
        [&](double m, double d) -> std::optional<RewardLearning> {
      budgets += reward_budget(pool, m, d, {});
      return learn_reward_validated(pool, oracle, m, d);
    };
    const auto out = guess_delta(pipeline, 0.1);
    EXPECT_LE(out.guesses.back().n, 5);
    EXPECT_GE(out.guesses.back().margin, 1.0 / 32.0);
    EXPECT_LE(oracle.calls(), budgets);
    EXPECT_TRUE(all_labels_correct(pool, out.value, model, 1));
  }
}

TEST(GuessDelta, ConfidenceSplitSumsBelowDelta) {
  const double delta = 0.1;
  std::function<std::optional<int>(double, double)> never = [](double, double) {
    return std::optional<int>{};
  };
  try {
    guess_delta(never, delta, 40);
    FAIL() << "expected the iteration cap";
  } catch (const OracleError&) {
  }
  double total = 0.0;
  for (int n = 1; n <= 40; ++n) total += delta / (n * (n + 1.0));
  EXPECT_LE(total, delta);
  EXPECT_NEAR(total, delta * 40.0 / 41.0, 1e-15);
}

TEST(GuessDelta, ValidationFailureMovesToNextGuess) {
  int calls = 0;
  std::function<std::optional<int>(double, double)> pipeline = [&](double m, double) -> std::optional<int> {
    ++calls;
    if (m > 0.3) throw ValidationFailure(0, 0.0, m);
    return 1;
  };
  const auto out = guess_delta(pipeline, 0.1);
  EXPECT_EQ(calls, 2);
  EXPECT_FALSE(out.guesses[0].accepted);
  EXPECT_FALSE(out.guesses[0].reason.empty());
  EXPECT_DOUBLE_EQ(out.guesses[1].margin, 0.25);
}

TEST(LowNoise, WorkedExamples) {
  EXPECT_NEAR(low_noise_delta(1.0, 1.0, 100.0), 0.01, 1e-15);
  EXPECT_NEAR(low_noise_delta(1.0, 0.5, 10.0), 0.01, 1e-15);
}

TEST(LowNoise, ClampedBelowOneHalf) {
  EXPECT_LT(low_noise_delta(0.1, 1.0, 1.0), 0.5);
  EXPECT_GT(low_noise_delta(1.0, 0.1, 1e6), 0.0);
  EXPECT_THROW(low_noise_delta(1.0, 0.0, 10.0), DataError);
  EXPECT_THROW(low_noise_delta(0.0, 1.0, 10.0), DataError);
}
