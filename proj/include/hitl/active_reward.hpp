#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hitl/errors.hpp"
#include "hitl/features.hpp"
#include "hitl/function_class.hpp"
#include "hitl/oracle.hpp"
#include "hitl/random.hpp"

namespace hitl {

struct PoolItem {
  std::size_t state = 0;
  std::size_t action = 0;
};

// Ordered candidate set for one stage. Items may repeat (a pool built from
// exploration data holds one entry per episode).
struct QueryPool {
  std::size_t stage = 0;
  std::vector<PoolItem> items;
  Eigen::MatrixXd features;  // one row per item
  std::vector<std::string> descriptions;

  std::size_t size() const { return items.size(); }
  Eigen::VectorXd feature(std::size_t i) const {
    return features.row(static_cast<Eigen::Index>(i)).transpose();
  }
  Query query(std::size_t i) const;
};

// descriptions may be empty; otherwise indexed [h][pair].
QueryPool make_pool(std::size_t stage, std::vector<PoolItem> items, const FeatureMap& features,
                    const std::vector<std::vector<std::string>>& descriptions = {});

// Every (state, action) of a stage, once.
QueryPool full_pool(std::size_t stage, const FeatureMap& features,
                    const std::vector<std::vector<std::string>>& descriptions = {});

// Greedy maximum-bonus selection. Earlier picks stay eligible; ties go to the
// smallest pool index.
std::vector<std::size_t> select_queries(const QueryPool& pool, std::size_t n, double beta,
                                        ModelKind kind);

// Uniform sampling without replacement; n is capped at the pool size.
std::vector<std::size_t> select_passive(const QueryPool& pool, std::size_t n, Rng& rng);

enum class SelectionMode { active, passive };

std::string to_string(SelectionMode mode);
SelectionMode selection_mode_from_string(const std::string& name);

struct RewardLearningConfig {
  ModelKind kind = ModelKind::linear;
  int levels = 1;
  double dim_f = 0.0;  // 0 means the feature dimension (at least 2)
  double c1 = 1.0;
  double c2 = 1.0;
  std::optional<std::size_t> budget;  // fixed N instead of the budget formula
  SelectionMode selection = SelectionMode::active;
  std::uint64_t seed = 0;
  Rounding rounding = Rounding::cover;
  FitOptions fit;
};

struct RewardLearning {
  StageModel fitted;
  StageModel rounded;
  std::vector<std::size_t> selected;
  std::vector<int> labels;
  std::size_t budget = 0;
  double beta = 0.0;
};

double effective_dim(const RewardLearningConfig& config, std::size_t feature_dim);

std::size_t reward_budget(const QueryPool& pool, double margin, double delta,
                          const RewardLearningConfig& config);

RewardLearning learn_reward(const QueryPool& pool, FeedbackOracle& oracle, double margin,
                            double delta, const RewardLearningConfig& config = {});

// As learn_reward, but throws ValidationFailure when the fitted model puts
// some pool point within margin / 2 of a level boundary.
RewardLearning learn_reward_validated(const QueryPool& pool, FeedbackOracle& oracle,
                                      double margin, double delta,
                                      const RewardLearningConfig& config = {});

struct Guess {
  int n = 0;
  double margin = 0.0;
  double delta = 0.0;
  bool accepted = false;
  std::string reason;
};

template <class T>
struct GuessOutcome {
  T value;
  std::vector<Guess> guesses;
};

// Runs pipeline(margin, delta) for margin = 2^-n and delta / (n (n + 1)),
// n = 1, 2, ..., returning the first result. Failure is an empty optional or
// a ValidationFailure.
template <class T>
GuessOutcome<T> guess_delta(const std::function<std::optional<T>(double, double)>& pipeline,
                            double delta, int max_guesses = 40) {
  if (!(delta > 0.0 && delta < 1.0)) throw DataError("delta must lie in (0, 1)");
  std::vector<Guess> guesses;
  for (int n = 1; n <= max_guesses; ++n) {
    Guess g{n, std::ldexp(1.0, -n), delta / (static_cast<double>(n) * (n + 1)), false, {}};
    std::optional<T> result;
    try {
      result = pipeline(g.margin, g.delta);
    } catch (const ValidationFailure& e) {
      g.reason = e.what();
    }
    g.accepted = result.has_value();
    guesses.push_back(g);
    if (result) return {std::move(*result), std::move(guesses)};
  }
  throw OracleError("no margin guess succeeded within " + std::to_string(max_guesses) +
                    " halvings");
}

// (c K)^(-1/alpha), clipped into (0, 1/2).
double low_noise_delta(double c, double alpha, double episodes);

}  // namespace hitl
