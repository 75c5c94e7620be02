#include "hitl/dataset.hpp"

#include <fstream>

#include "hitl/errors.hpp"

namespace hitl {

TrajectoryDataset::TrajectoryDataset(std::size_t num_states,
                                     std::vector<std::size_t> actions_per_stage)
    : num_states_(num_states), actions_(std::move(actions_per_stage)) {
  if (num_states_ == 0 || actions_.empty()) throw DataError("dataset needs states and stages");
  for (auto a : actions_) {
    if (a == 0) throw DataError("every stage needs at least one action");
    const auto pairs = static_cast<Eigen::Index>(num_states_ * a);
    visits_.push_back(Eigen::VectorXd::Zero(pairs));
    counts_.push_back(Eigen::MatrixXd::Zero(pairs, static_cast<Eigen::Index>(num_states_)));
  }
}

void TrajectoryDataset::add_episode(std::vector<std::size_t> states,
                                    std::vector<std::size_t> actions) {
  const auto H = horizon();
  if (states.size() != H + 1 || actions.size() != H) {
    throw DataError("episode needs H + 1 states and H actions");
  }
  for (std::size_t h = 0; h <= H; ++h) {
    if (states[h] >= num_states_) throw DataError("episode state out of range");
  }
  for (std::size_t h = 0; h < H; ++h) {
    if (actions[h] >= actions_[h]) throw DataError("episode action out of range");
  }
  for (std::size_t h = 0; h < H; ++h) {
    const auto p = static_cast<Eigen::Index>(states[h] * actions_[h] + actions[h]);
    visits_[h][p] += 1.0;
    counts_[h](p, static_cast<Eigen::Index>(states[h + 1])) += 1.0;
  }
  states_.push_back(std::move(states));
  taken_.push_back(std::move(actions));
}

Eigen::MatrixXd TrajectoryDataset::gram(std::size_t h, const FeatureMap& features,
                                        std::size_t upto) const {
  const auto d = static_cast<Eigen::Index>(features.dim());
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(d, d);
  const auto& table = features.stage(h);
  for (std::size_t k = 0; k < std::min(upto, episodes()); ++k) {
    const auto row = table.row(static_cast<Eigen::Index>(pair(k, h)));
    g.noalias() += row.transpose() * row;
  }
  return g;
}

namespace {

json body_to_json(const TrajectoryDataset& data, const FeatureMap* features) {
  json episodes = json::array();
  for (std::size_t k = 0; k < data.episodes(); ++k) {
    json st = json::array();
    json ac = json::array();
    for (std::size_t h = 0; h <= data.horizon(); ++h) st.push_back(data.state(k, h));
    for (std::size_t h = 0; h < data.horizon(); ++h) ac.push_back(data.action(k, h));
    episodes.push_back({{"states", st}, {"actions", ac}});
  }
  json visits = json::array();
  json counts = json::array();
  for (std::size_t h = 0; h < data.horizon(); ++h) {
    visits.push_back(vector_to_json(data.visits(h)));
    // Sparse triples (pair, next_state, count) keep files small.
    json triples = json::array();
    const auto& c = data.transition_counts(h);
    for (Eigen::Index p = 0; p < c.rows(); ++p) {
      for (Eigen::Index s = 0; s < c.cols(); ++s) {
        if (c(p, s) > 0.0) triples.push_back({p, s, c(p, s)});
      }
    }
    counts.push_back(std::move(triples));
  }
  json j{{"S", data.num_states()},
         {"actions", data.actions_per_stage()},
         {"episodes", std::move(episodes)},
         {"visits", std::move(visits)},
         {"counts", std::move(counts)},
         {"provenance", data.provenance}};
  if (features) {
    json grams = json::array();
    for (std::size_t h = 0; h < data.horizon(); ++h) {
      grams.push_back(matrix_to_json(data.gram(h, *features)));
    }
    j["gram"] = std::move(grams);
    j["feature_hash"] = features->content_hash();
  }
  return j;
}

}  // namespace

json dataset_to_json(const TrajectoryDataset& data, const FeatureMap* features) {
  json j = body_to_json(data, features);
  j["hash"] = hex64(fnv1a(j.dump()));
  return j;
}

TrajectoryDataset dataset_from_json(const json& j) {
  try {
    TrajectoryDataset data(j.at("S").get<std::size_t>(),
                           j.at("actions").get<std::vector<std::size_t>>());
    for (const auto& ep : j.at("episodes")) {
      data.add_episode(ep.at("states").get<std::vector<std::size_t>>(),
                       ep.at("actions").get<std::vector<std::size_t>>());
    }
    data.provenance = j.value("provenance", json::object());

    const auto& visits = j.at("visits");
    const auto& counts = j.at("counts");
    if (visits.size() != data.horizon() || counts.size() != data.horizon()) {
      throw DataError("dataset counts do not cover every stage");
    }
    for (std::size_t h = 0; h < data.horizon(); ++h) {
      if (vector_from_json(visits[h]) != data.visits(h)) {
        throw DataError("stored visit counts disagree with the episodes at stage " +
                        std::to_string(h));
      }
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(data.transition_counts(h).rows(),
                                                data.transition_counts(h).cols());
      for (const auto& t : counts[h]) {
        const auto p = t.at(0).get<Eigen::Index>();
        const auto s = t.at(1).get<Eigen::Index>();
        if (p < 0 || p >= c.rows() || s < 0 || s >= c.cols()) {
          throw DataError("transition count index out of range");
        }
        c(p, s) = t.at(2).get<double>();
      }
      if (c != data.transition_counts(h)) {
        throw DataError("stored transition counts disagree with the episodes at stage " +
                        std::to_string(h));
      }
    }
    if (j.contains("hash")) {
      json body = j;
      body.erase("hash");
      if (hex64(fnv1a(body.dump())) != j.at("hash").get<std::string>()) {
        throw DataError("dataset content hash mismatch");
      }
    }
    return data;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed dataset: ") + e.what());
  }
}

void save_dataset(const std::string& path, const TrajectoryDataset& data,
                  const FeatureMap* features) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset " + path);
  out << dataset_to_json(data, features).dump() << '\n';
}

TrajectoryDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError("dataset " + path + " is not valid JSON: " + e.what());
  }
  return dataset_from_json(j);
}

}  // namespace hitl
