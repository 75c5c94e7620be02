#include "hitl/features.hpp"

#include "hitl/errors.hpp"

namespace hitl {

FeatureMap::FeatureMap(std::size_t num_states, std::vector<std::size_t> actions_per_stage,
                       std::vector<Eigen::MatrixXd> tables)
    : num_states_(num_states), actions_(std::move(actions_per_stage)), tables_(std::move(tables)) {
  if (tables_.size() != actions_.size()) throw DataError("feature map stage count mismatch");
  if (tables_.empty()) throw DataError("feature map needs at least one stage");
  dim_ = static_cast<std::size_t>(tables_.front().cols());
  if (dim_ == 0) throw DataError("feature dimension must be positive");
  for (std::size_t h = 0; h < tables_.size(); ++h) {
    if (static_cast<std::size_t>(tables_[h].rows()) != num_states_ * actions_[h] ||
        static_cast<std::size_t>(tables_[h].cols()) != dim_) {
      throw DataError("feature table stage " + std::to_string(h) + " has wrong shape");
    }
  }
}

double FeatureMap::max_norm() const {
  double best = 0.0;
  for (const auto& t : tables_) best = std::max(best, t.rowwise().norm().maxCoeff());
  return best;
}

bool FeatureMap::non_negative() const {
  for (const auto& t : tables_) {
    if ((t.array() < 0.0).any()) return false;
  }
  return true;
}

FeatureMap FeatureMap::select_states(const std::vector<std::size_t>& keep) const {
  std::vector<Eigen::MatrixXd> tables(tables_.size());
  for (std::size_t h = 0; h < tables_.size(); ++h) {
    const auto a_count = static_cast<Eigen::Index>(actions_[h]);
    tables[h].resize(static_cast<Eigen::Index>(keep.size()) * a_count,
                     static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < keep.size(); ++i) {
      tables[h].middleRows(static_cast<Eigen::Index>(i) * a_count, a_count) =
          tables_[h].middleRows(static_cast<Eigen::Index>(keep[i]) * a_count, a_count);
    }
  }
  return FeatureMap(keep.size(), actions_, std::move(tables));
}

std::string FeatureMap::content_hash() const {
  json j;
  to_json(j, *this);
  return hex64(fnv1a(j.dump()));
}

void to_json(json& j, const FeatureMap& map) {
  json stages = json::array();
  for (std::size_t h = 0; h < map.horizon(); ++h) stages.push_back(matrix_to_json(map.stage(h)));
  j = json{{"d", map.dim()},
           {"S", map.num_states()},
           {"actions", map.actions_per_stage()},
           {"phi", std::move(stages)}};
}

FeatureMap feature_map_from_json(const json& j) {
  try {
    const auto d = j.at("d").get<std::size_t>();
    const auto s_count = j.at("S").get<std::size_t>();
    auto actions = j.at("actions").get<std::vector<std::size_t>>();
    std::vector<Eigen::MatrixXd> tables;
    for (const auto& stage : j.at("phi")) {
      tables.push_back(matrix_from_json(stage, static_cast<Eigen::Index>(d)));
    }
    return FeatureMap(s_count, std::move(actions), std::move(tables));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed feature map: ") + e.what());
  }
}

}  // namespace hitl
