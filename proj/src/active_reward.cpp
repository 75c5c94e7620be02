#include "hitl/active_reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "hitl/env.hpp"

namespace hitl {

Query QueryPool::query(std::size_t i) const {
  Query q;
  q.stage = stage;
  q.state = items[i].state;
  q.action = items[i].action;
  q.feature = feature(i);
  if (i < descriptions.size()) q.description = descriptions[i];
  return q;
}

QueryPool make_pool(std::size_t stage, std::vector<PoolItem> items, const FeatureMap& features,
                    const std::vector<std::vector<std::string>>& descriptions) {
  if (items.empty()) throw DataError("query pool is empty");
  if (stage >= features.horizon()) throw DataError("pool stage outside the horizon");
  QueryPool pool;
  pool.stage = stage;
  pool.features.resize(static_cast<Eigen::Index>(items.size()),
                       static_cast<Eigen::Index>(features.dim()));
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    if (it.state >= features.num_states() || it.action >= features.num_actions(stage)) {
      throw DataError("pool item (" + std::to_string(it.state) + ", " +
                      std::to_string(it.action) + ") invalid at stage " + std::to_string(stage));
    }
    pool.features.row(static_cast<Eigen::Index>(i)) = features(stage, it.state, it.action);
    if (!descriptions.empty()) {
      pool.descriptions.push_back(
          descriptions.at(stage).at(it.state * features.num_actions(stage) + it.action));
    }
  }
  pool.items = std::move(items);
  return pool;
}

QueryPool full_pool(std::size_t stage, const FeatureMap& features,
                    const std::vector<std::vector<std::string>>& descriptions) {
  std::vector<PoolItem> items;
  for (std::size_t s = 0; s < features.num_states(); ++s) {
    for (std::size_t a = 0; a < features.num_actions(stage); ++a) items.push_back({s, a});
  }
  return make_pool(stage, std::move(items), features, descriptions);
}

std::vector<std::size_t> select_queries(const QueryPool& pool, std::size_t n, double beta,
                                        ModelKind kind) {
  if (pool.size() == 0) throw DataError("query pool is empty");
  // Identical features always score identically, so only the first
  // occurrence of each distinct row competes.
  std::map<std::vector<double>, std::size_t> first;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const Eigen::VectorXd f = pool.feature(i);
    if (first.emplace(std::vector<double>(f.data(), f.data() + f.size()), i).second) {
      candidates.push_back(i);
    }
  }
  std::vector<Eigen::VectorXd> feats;
  feats.reserve(candidates.size());
  for (auto i : candidates) feats.push_back(pool.feature(i));

  ConfidenceSet set(kind, pool.features.cols(), beta);
  std::vector<std::size_t> picked;
  picked.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t best = 0;
    double best_bonus = -1.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const double b = bonus(set, feats[c]);
      if (b > best_bonus + 1e-12) {
        best_bonus = b;
        best = c;
      }
    }
    picked.push_back(candidates[best]);
    set = set.with_point(feats[best]);
  }
  return picked;
}

std::vector<std::size_t> select_passive(const QueryPool& pool, std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  n = std::min(n, order.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(n);
  return order;
}

std::string to_string(SelectionMode mode) {
  return mode == SelectionMode::active ? "active" : "passive";
}

SelectionMode selection_mode_from_string(const std::string& name) {
  if (name == "active") return SelectionMode::active;
  if (name == "passive") return SelectionMode::passive;
  throw DataError("unknown selection mode " + name);
}

double effective_dim(const RewardLearningConfig& config, std::size_t feature_dim) {
  if (config.dim_f > 0.0) return config.dim_f;
  return std::max(2.0, static_cast<double>(feature_dim));
}

std::size_t reward_budget(const QueryPool& pool, double margin, double delta,
                          const RewardLearningConfig& config) {
  const double dim_f = effective_dim(config, static_cast<std::size_t>(pool.features.cols()));
  if (config.budget) {
    if (*config.budget == 0) throw DataError("query budget must be positive");
    // Still validates the margin and confidence arguments.
    query_budget(dim_f, margin, delta, config.c1, pool.size());
    return std::min(*config.budget, pool.size());
  }
  return query_budget(dim_f, margin, delta, config.c1, pool.size());
}

namespace {

RewardLearning learn(const QueryPool& pool, FeedbackOracle& oracle, double margin, double delta,
                     const RewardLearningConfig& config, bool validate) {
  if (pool.size() == 0) throw DataError("query pool is empty");
  if (oracle.levels() != config.levels) {
    throw DataError("oracle answers " + std::to_string(oracle.levels()) +
                    " levels but reward learning expects " + std::to_string(config.levels));
  }
  RewardLearning out;
  out.budget = reward_budget(pool, margin, delta, config);
  const double dim_f = effective_dim(config, static_cast<std::size_t>(pool.features.cols()));
  out.beta = beta_schedule(out.budget, dim_f, delta, config.c2);

  if (config.selection == SelectionMode::active) {
    out.selected = select_queries(pool, out.budget, out.beta, config.kind);
  } else {
    Rng rng(config.seed);
    out.selected = select_passive(pool, out.budget, rng);
  }

  std::vector<Query> queries;
  queries.reserve(out.selected.size());
  for (auto i : out.selected) queries.push_back(pool.query(i));
  out.labels = oracle.ask_batch(queries);

  Eigen::MatrixXd x(static_cast<Eigen::Index>(out.selected.size()), pool.features.cols());
  Eigen::VectorXd y(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    x.row(r) = pool.features.row(static_cast<Eigen::Index>(out.selected[r]));
    y[r] = static_cast<double>(out.labels[r]) / config.levels;
  }
  out.fitted = ls_fit(config.kind, x, y, config.fit);

  if (validate) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const double gap = boundary_distance(out.fitted(pool.feature(i)), config.levels);
      if (gap <= margin / 2.0) throw ValidationFailure(i, gap, margin);
    }
  }
  out.rounded = round_to_cover(out.fitted, margin, config.rounding);
  return out;
}

}  // namespace

RewardLearning learn_reward(const QueryPool& pool, FeedbackOracle& oracle, double margin,
                            double delta, const RewardLearningConfig& config) {
  return learn(pool, oracle, margin, delta, config, false);
}

RewardLearning learn_reward_validated(const QueryPool& pool, FeedbackOracle& oracle,
                                      double margin, double delta,
                                      const RewardLearningConfig& config) {
  return learn(pool, oracle, margin, delta, config, true);
}

double low_noise_delta(double c, double alpha, double episodes) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DataError("alpha must lie in (0, 1]");
  if (!(c > 0.0)) throw DataError("c must be positive");
  if (!(episodes >= 1.0)) throw DataError("K must be at least 1");
  const double margin = std::pow(c * episodes, -1.0 / alpha);
  return std::clamp(margin, std::numeric_limits<double>::min(), std::nextafter(0.5, 0.0));
}

}  // namespace hitl
