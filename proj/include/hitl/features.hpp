#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hitl/json.hpp"

namespace hitl {

// phi(h, s, a) in R^d, stored per stage as an (S * A_h) x d matrix whose row
// order matches TabularMDP::pair_index.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t num_states, std::vector<std::size_t> actions_per_stage,
             std::vector<Eigen::MatrixXd> tables);

  std::size_t dim() const { return dim_; }
  std::size_t num_states() const { return num_states_; }
  std::size_t horizon() const { return tables_.size(); }
  std::size_t num_actions(std::size_t h) const { return actions_[h]; }
  const std::vector<std::size_t>& actions_per_stage() const { return actions_; }

  const Eigen::MatrixXd& stage(std::size_t h) const { return tables_[h]; }
  Eigen::VectorXd operator()(std::size_t h, std::size_t s, std::size_t a) const {
    return tables_[h].row(static_cast<Eigen::Index>(s * actions_[h] + a)).transpose();
  }

  double max_norm() const;
  bool non_negative() const;

  // Restrict to a subset of states (in the given order).
  FeatureMap select_states(const std::vector<std::size_t>& keep) const;

  std::string content_hash() const;

 private:
  std::size_t num_states_ = 0;
  std::vector<std::size_t> actions_;
  std::vector<Eigen::MatrixXd> tables_;
  std::size_t dim_ = 0;
};

void to_json(json& j, const FeatureMap& map);
FeatureMap feature_map_from_json(const json& j);

}  // namespace hitl
