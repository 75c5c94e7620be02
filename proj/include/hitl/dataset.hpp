#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hitl/features.hpp"
#include "hitl/json.hpp"

namespace hitl {

// K episodes of (s_h, a_h) pairs plus the terminal state, with per-stage
// visit and transition counts kept in sync.
class TrajectoryDataset {
 public:
  TrajectoryDataset() = default;
  TrajectoryDataset(std::size_t num_states, std::vector<std::size_t> actions_per_stage);

  std::size_t num_states() const { return num_states_; }
  std::size_t horizon() const { return actions_.size(); }
  std::size_t num_actions(std::size_t h) const { return actions_[h]; }
  const std::vector<std::size_t>& actions_per_stage() const { return actions_; }
  std::size_t episodes() const { return states_.size(); }

  // states has H + 1 entries, actions H.
  void add_episode(std::vector<std::size_t> states, std::vector<std::size_t> actions);

  std::size_t state(std::size_t k, std::size_t h) const { return states_[k][h]; }
  std::size_t action(std::size_t k, std::size_t h) const { return taken_[k][h]; }
  std::size_t pair(std::size_t k, std::size_t h) const {
    return states_[k][h] * actions_[h] + taken_[k][h];
  }

  // N_h(s, a) over (S * A_h) pairs and N_h(s, a, s') as (S * A_h) x S.
  const Eigen::VectorXd& visits(std::size_t h) const { return visits_[h]; }
  const Eigen::MatrixXd& transition_counts(std::size_t h) const { return counts_[h]; }

  // Lambda_h = I + sum_k phi phi^T over the first `upto` episodes.
  Eigen::MatrixXd gram(std::size_t h, const FeatureMap& features, std::size_t upto) const;
  Eigen::MatrixXd gram(std::size_t h, const FeatureMap& features) const {
    return gram(h, features, episodes());
  }

  json provenance = json::object();

 private:
  std::size_t num_states_ = 0;
  std::vector<std::size_t> actions_;
  std::vector<std::vector<std::size_t>> states_;
  std::vector<std::vector<std::size_t>> taken_;
  std::vector<Eigen::VectorXd> visits_;
  std::vector<Eigen::MatrixXd> counts_;
};

// File form: {S, actions, episodes: [{states, actions}], counts, visits,
// provenance, gram (when features are given), feature_hash, hash}. The hash
// covers everything but itself.
json dataset_to_json(const TrajectoryDataset& data, const FeatureMap* features = nullptr);

// Rebuilds counts from the episodes and rejects files whose stored counts or
// hash disagree.
TrajectoryDataset dataset_from_json(const json& j);

void save_dataset(const std::string& path, const TrajectoryDataset& data,
                  const FeatureMap* features = nullptr);
TrajectoryDataset load_dataset(const std::string& path);

}  // namespace hitl
