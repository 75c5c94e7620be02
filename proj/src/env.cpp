#include "hitl/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hitl/errors.hpp"
#include "hitl/random.hpp"

namespace hitl {

namespace {

Eigen::MatrixXd random_transitions(std::size_t rows, std::size_t num_states, Rng& rng) {
  Eigen::MatrixXd p(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(num_states));
  for (std::size_t r = 0; r < rows; ++r) {
    p.row(static_cast<Eigen::Index>(r)) =
        sample_simplex(static_cast<Eigen::Index>(num_states), rng).transpose();
  }
  return p;
}

Eigen::VectorXd scaled_ball_point(std::size_t dim, const FeatureScaling& scaling, Rng& rng) {
  const double m = scaling.radius_min + (scaling.radius_max - scaling.radius_min) * uniform01(rng);
  return m * sample_ball(static_cast<Eigen::Index>(dim), rng);
}

std::vector<std::vector<int>> zero_levels(std::size_t num_states,
                                          const std::vector<std::size_t>& actions) {
  std::vector<std::vector<int>> out;
  for (std::size_t a : actions) out.emplace_back(num_states * a, 0);
  return out;
}

}  // namespace

TabularMDP gen_random_tabular(std::size_t num_states, const std::vector<std::size_t>& actions,
                              std::uint64_t seed) {
  if (num_states < 2) throw DataError("random tabular MDP needs S >= 2");
  if (actions.empty()) throw DataError("random tabular MDP needs H >= 1");
  Rng rng(seed);
  std::vector<Eigen::MatrixXd> transitions;
  for (std::size_t a : actions) {
    if (a == 0) throw DataError("every stage needs at least one action");
    transitions.push_back(random_transitions(num_states * a, num_states, rng));
  }
  return TabularMDP(num_states, actions, std::move(transitions), zero_levels(num_states, actions),
                    1, 0);
}

FeatureMap gen_features(std::size_t num_states, const std::vector<std::size_t>& actions,
                        std::size_t dim, std::uint64_t seed, const FeatureScaling& scaling) {
  if (dim == 0) throw DataError("feature dimension must be positive");
  Rng rng(seed);
  std::vector<Eigen::MatrixXd> tables;
  for (std::size_t a : actions) {
    Eigen::MatrixXd t(static_cast<Eigen::Index>(num_states * a), static_cast<Eigen::Index>(dim));
    for (Eigen::Index row = 0; row < t.rows(); ++row) {
      t.row(row) = scaled_ball_point(dim, scaling, rng).transpose();
    }
    tables.push_back(std::move(t));
  }
  return FeatureMap(num_states, actions, std::move(tables));
}

ResponseModel gen_response_model(ModelKind kind, const FeatureMap& features, std::uint64_t seed,
                                 double weight_norm) {
  if (weight_norm < 0.0 || weight_norm > 1.0) throw DataError("weight norm must lie in [0, 1]");
  Rng rng(seed);
  ResponseModel model;
  model.kind = kind;
  model.feature_hash = features.content_hash();
  for (std::size_t h = 0; h < features.horizon(); ++h) {
    model.weights.push_back(weight_norm *
                            sample_sphere(static_cast<Eigen::Index>(features.dim()), rng));
  }
  return model;
}

std::vector<std::vector<int>> threshold_rewards(const ResponseModel& model,
                                                const FeatureMap& features, int levels) {
  std::vector<std::vector<int>> out(features.horizon());
  for (std::size_t h = 0; h < features.horizon(); ++h) {
    const auto stage = model.stage(h);
    const auto& table = features.stage(h);
    for (Eigen::Index row = 0; row < table.rows(); ++row) {
      out[h].push_back(threshold_level(stage(table.row(row).transpose()), levels));
    }
  }
  return out;
}

double boundary_distance(double f, int levels) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= levels; ++i) {
    best = std::min(best, std::abs(f - static_cast<double>(2 * i - 1) / (2.0 * levels)));
  }
  return best;
}

double achieved_margin(const ResponseModel& model, const FeatureMap& features, int levels) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t h = 0; h < features.horizon(); ++h) {
    const auto stage = model.stage(h);
    const auto& table = features.stage(h);
    for (Eigen::Index row = 0; row < table.rows(); ++row) {
      best = std::min(best, boundary_distance(stage(table.row(row).transpose()), levels));
    }
  }
  return best;
}

MarginResult enforce_margin(const ResponseModel& model, const TabularMDP& mdp,
                            const FeatureMap& features, double margin) {
  if (!(margin >= 0.0 && margin < 0.5)) throw DataError("margin must lie in [0, 1/2)");
  const int levels = mdp.levels();
  std::vector<std::size_t> keep;
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    bool ok = true;
    for (std::size_t h = 0; h < mdp.horizon() && ok; ++h) {
      for (std::size_t a = 0; a < mdp.num_actions(h) && ok; ++a) {
        ok = boundary_distance(model(h, features(h, s, a)), levels) > margin;
      }
    }
    if (ok) keep.push_back(s);
  }
  if (keep.size() < 2) throw DataError("fewer than 2 states satisfy the margin");
  const auto s1 = std::find(keep.begin(), keep.end(), mdp.initial_state());
  if (s1 == keep.end()) throw DataError("initial state violates the margin");

  std::vector<Eigen::MatrixXd> transitions;
  for (std::size_t h = 0; h < mdp.horizon(); ++h) {
    const auto a_count = mdp.num_actions(h);
    Eigen::MatrixXd p(static_cast<Eigen::Index>(keep.size() * a_count),
                      static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
      for (std::size_t a = 0; a < a_count; ++a) {
        const auto row = mdp.transition_row(h, keep[i], a);
        double mass = 0.0;
        for (std::size_t j = 0; j < keep.size(); ++j) mass += row[static_cast<Eigen::Index>(keep[j])];
        if (mass <= 0.0) throw DataError("transition row has no mass on surviving states");
        for (std::size_t j = 0; j < keep.size(); ++j) {
          p(static_cast<Eigen::Index>(i * a_count + a), static_cast<Eigen::Index>(j)) =
              row[static_cast<Eigen::Index>(keep[j])] / mass;
        }
      }
    }
    transitions.push_back(std::move(p));
  }
  FeatureMap kept_features = features.select_states(keep);
  auto rewards = threshold_rewards(model, kept_features, levels);
  TabularMDP restricted(keep.size(), mdp.actions_per_stage(), std::move(transitions),
                        std::move(rewards), levels, static_cast<std::size_t>(s1 - keep.begin()));
  return {std::move(restricted), std::move(kept_features), std::move(keep)};
}

EnvBundle gen_env(const EnvConfig& config, std::uint64_t seed) {
  if (config.num_states < 2) throw DataError("environment needs S >= 2");
  if (config.actions.empty()) throw DataError("environment needs H >= 1");
  if (!(config.margin >= 0.0 && config.margin < 0.5)) throw DataError("margin must lie in [0, 1/2)");
  Rng rng(seed);
  const std::size_t horizon = config.actions.size();

  ResponseModel model;
  model.kind = config.kind;
  for (std::size_t h = 0; h < horizon; ++h) {
    model.weights.push_back(config.weight_norm *
                            sample_sphere(static_cast<Eigen::Index>(config.dim), rng));
  }

  std::vector<Eigen::MatrixXd> tables;
  for (std::size_t a : config.actions) {
    tables.emplace_back(static_cast<Eigen::Index>(config.num_states * a),
                        static_cast<Eigen::Index>(config.dim));
  }
  for (std::size_t s = 0; s < config.num_states; ++s) {
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < config.max_attempts_per_state && !accepted; ++attempt) {
      accepted = true;
      for (std::size_t h = 0; h < horizon; ++h) {
        const auto a_count = config.actions[h];
        for (std::size_t a = 0; a < a_count; ++a) {
          const Eigen::VectorXd phi = scaled_ball_point(config.dim, config.scaling, rng);
          tables[h].row(static_cast<Eigen::Index>(s * a_count + a)) = phi.transpose();
          if (boundary_distance(model(h, phi), config.levels) <= config.margin) accepted = false;
        }
      }
    }
    if (!accepted) throw DataError("could not draw a state satisfying the margin");
  }
  FeatureMap features(config.num_states, config.actions, std::move(tables));
  model.feature_hash = features.content_hash();

  std::vector<Eigen::MatrixXd> transitions;
  for (std::size_t a : config.actions) {
    transitions.push_back(random_transitions(config.num_states * a, config.num_states, rng));
  }
  auto rewards = threshold_rewards(model, features, config.levels);
  TabularMDP mdp(config.num_states, config.actions, std::move(transitions), std::move(rewards),
                 config.levels, 0);
  const double margin = achieved_margin(model, features, config.levels);
  auto describe = default_descriptions(features);
  return {std::move(mdp), std::move(features), std::move(model), margin, std::move(describe)};
}

std::vector<std::vector<std::string>> default_descriptions(const FeatureMap& features) {
  std::vector<std::vector<std::string>> out(features.horizon());
  for (std::size_t h = 0; h < features.horizon(); ++h) {
    for (std::size_t s = 0; s < features.num_states(); ++s) {
      for (std::size_t a = 0; a < features.num_actions(h); ++a) {
        std::ostringstream text;
        text << "stage " << h + 1 << ", state " << s << ", action " << a;
        out[h].push_back(text.str());
      }
    }
  }
  return out;
}

void to_json(json& j, const EnvBundle& bundle) {
  j = json{{"mdp", bundle.mdp},
           {"features", bundle.features},
           {"model", bundle.model},
           {"margin", bundle.margin},
           {"describe", bundle.describe}};
}

EnvBundle env_bundle_from_json(const json& j) {
  try {
    auto mdp = mdp_from_json(j.at("mdp"));
    auto features = feature_map_from_json(j.at("features"));
    auto model = response_model_from_json(j.at("model"));
    if (features.num_states() != mdp.num_states() ||
        features.actions_per_stage() != mdp.actions_per_stage()) {
      throw DataError("feature map shape does not match the MDP");
    }
    if (model.weights.size() != mdp.horizon()) throw DataError("model stage count != H");
    if (features.max_norm() > 1.0 + 1e-9) throw DataError("feature norms must not exceed 1");
    auto describe = j.contains("describe")
                        ? j.at("describe").get<std::vector<std::vector<std::string>>>()
                        : default_descriptions(features);
    return {std::move(mdp), std::move(features), std::move(model), j.value("margin", 0.0),
            std::move(describe)};
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed environment bundle: ") + e.what());
  }
}

TabularMDP induced_mdp(const LinearMDPFactors& factors, std::size_t initial_state) {
  const auto& features = factors.features;
  std::vector<Eigen::MatrixXd> transitions;
  for (std::size_t h = 0; h < features.horizon(); ++h) {
    Eigen::MatrixXd p = features.stage(h) * factors.mu[h].transpose();
    // Absorb floating-point drift so rows pass the simplex check exactly.
    for (Eigen::Index r = 0; r < p.rows(); ++r) p.row(r) /= p.row(r).sum();
    transitions.push_back(std::move(p));
  }
  return TabularMDP(features.num_states(), features.actions_per_stage(), std::move(transitions),
                    zero_levels(features.num_states(), features.actions_per_stage()), 1,
                    initial_state);
}

LinearMDP gen_linear_mdp(std::size_t dim, std::size_t num_states,
                         const std::vector<std::size_t>& actions, std::uint64_t seed) {
  if (dim == 0 || dim > num_states) throw DataError("linear MDP needs 1 <= d <= S");
  Rng rng(seed);
  std::vector<Eigen::MatrixXd> tables;
  std::vector<Eigen::MatrixXd> mu;
  for (std::size_t h = 0; h < actions.size(); ++h) {
    // Column x of mu_h is an emission law over S scaled by a mass in [1, 2];
    // phi is a probability vector divided by those masses, so <phi, sum mu> = 1
    // and ||phi|| <= 1.
    Eigen::VectorXd mass(static_cast<Eigen::Index>(dim));
    Eigen::MatrixXd m(static_cast<Eigen::Index>(num_states), static_cast<Eigen::Index>(dim));
    for (Eigen::Index x = 0; x < m.cols(); ++x) {
      mass[x] = 1.0 + uniform01(rng);
      m.col(x) = mass[x] * sample_simplex(static_cast<Eigen::Index>(num_states), rng);
    }
    Eigen::MatrixXd t(static_cast<Eigen::Index>(num_states * actions[h]),
                      static_cast<Eigen::Index>(dim));
    for (Eigen::Index row = 0; row < t.rows(); ++row) {
      const Eigen::VectorXd p = sample_simplex(static_cast<Eigen::Index>(dim), rng);
      t.row(row) = p.cwiseQuotient(mass).transpose();
      const double check = t.row(row).dot(m.colwise().sum());
      if (!(check > 0.0)) throw DataError("linear MDP normalization failed");
    }
    tables.push_back(std::move(t));
    mu.push_back(std::move(m));
  }
  LinearMDPFactors factors{FeatureMap(num_states, actions, std::move(tables)), std::move(mu)};
  auto mdp = induced_mdp(factors);
  return {std::move(mdp), std::move(factors)};
}

LatentDecomposition latent_decompose(const LinearMDPFactors& factors) {
  const auto& features = factors.features;
  if (!features.non_negative()) throw DataError("latent decomposition needs non-negative phi");
  LatentDecomposition out;
  for (std::size_t h = 0; h < features.horizon(); ++h) {
    const Eigen::MatrixXd& m = factors.mu[h];
    if ((m.array() < 0.0).any()) throw DataError("latent decomposition needs non-negative mu");
    const Eigen::VectorXd mass = m.colwise().sum().transpose();
    std::vector<std::size_t> kept;
    for (Eigen::Index x = 0; x < mass.size(); ++x) {
      if (mass[x] > 0.0) {
        kept.push_back(static_cast<std::size_t>(x));
      } else {
        out.warnings.push_back("stage " + std::to_string(h) + ": latent state " +
                               std::to_string(x) + " has zero mass and was dropped");
      }
    }
    const auto& phi = features.stage(h);
    Eigen::MatrixXd psi(phi.rows(), static_cast<Eigen::Index>(kept.size()));
    Eigen::MatrixXd nu(static_cast<Eigen::Index>(kept.size()), m.rows());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const auto x = static_cast<Eigen::Index>(kept[i]);
      psi.col(static_cast<Eigen::Index>(i)) = phi.col(x) * mass[x];
      nu.row(static_cast<Eigen::Index>(i)) = m.col(x).transpose() / mass[x];
    }
    out.psi.push_back(std::move(psi));
    out.nu.push_back(std::move(nu));
    out.latent_index.push_back(std::move(kept));
  }
  return out;
}

}  // namespace hitl
