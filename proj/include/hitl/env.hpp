#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hitl/features.hpp"
#include "hitl/function_class.hpp"
#include "hitl/json.hpp"
#include "hitl/mdp.hpp"

namespace hitl {

// Feature vectors are m * u with u uniform in the unit ball and m drawn
// uniformly from [radius_min, radius_max].
struct FeatureScaling {
  double radius_min = 0.5;
  double radius_max = 1.0;
};

// Random tabular MDP with Dirichlet(1) transition rows and all-zero rewards.
TabularMDP gen_random_tabular(std::size_t num_states, const std::vector<std::size_t>& actions,
                              std::uint64_t seed);

FeatureMap gen_features(std::size_t num_states, const std::vector<std::size_t>& actions,
                        std::size_t dim, std::uint64_t seed, const FeatureScaling& scaling = {});

// Per-stage weight vectors drawn uniformly from the unit sphere, scaled by
// weight_norm (<= 1).
ResponseModel gen_response_model(ModelKind kind, const FeatureMap& features, std::uint64_t seed,
                                 double weight_norm = 1.0);

// True reward levels obtained by thresholding f* on every (h, s, a).
std::vector<std::vector<int>> threshold_rewards(const ResponseModel& model,
                                                const FeatureMap& features, int levels);

// Smallest distance of f* to a decision boundary (2i - 1) / 2n over all pairs.
double achieved_margin(const ResponseModel& model, const FeatureMap& features, int levels);

// Distance of a response value to the nearest level boundary.
double boundary_distance(double f, int levels);

struct MarginResult {
  TabularMDP mdp;
  FeatureMap features;
  std::vector<std::size_t> kept_states;
};

// Deletes every state owning a pair within margin of a decision boundary,
// renormalizes transition rows over the survivors and resets the true
// rewards by thresholding f*.
MarginResult enforce_margin(const ResponseModel& model, const TabularMDP& mdp,
                            const FeatureMap& features, double margin);

// Everything an experiment needs about one environment.
struct EnvBundle {
  TabularMDP mdp;
  FeatureMap features;
  ResponseModel model;
  double margin = 0.0;
  std::vector<std::vector<std::string>> describe;
};

struct EnvConfig {
  std::size_t num_states = 20;
  std::vector<std::size_t> actions{10, 3};
  std::size_t dim = 5;
  int levels = 1;
  double margin = 0.05;
  ModelKind kind = ModelKind::linear;
  FeatureScaling scaling;
  double weight_norm = 1.0;
  std::size_t max_attempts_per_state = 1000000;
};

// Random instance satisfying the margin condition: candidate states whose
// features put some pair within the margin are discarded and redrawn, then
// transitions are drawn over the S retained states.
EnvBundle gen_env(const EnvConfig& config, std::uint64_t seed);

std::vector<std::vector<std::string>> default_descriptions(const FeatureMap& features);

void to_json(json& j, const EnvBundle& bundle);
EnvBundle env_bundle_from_json(const json& j);

struct LinearMDPFactors {
  FeatureMap features;              // non-negative phi(h, s, a)
  std::vector<Eigen::MatrixXd> mu;  // mu[h] is S x d, row s' is mu_h(s')
};

struct LinearMDP {
  TabularMDP mdp;
  LinearMDPFactors factors;
};

// P_h(s' | s, a) = <mu_h(s'), phi(h, s, a)>.
TabularMDP induced_mdp(const LinearMDPFactors& factors, std::size_t initial_state = 0);

LinearMDP gen_linear_mdp(std::size_t dim, std::size_t num_states,
                         const std::vector<std::size_t>& actions, std::uint64_t seed);

struct LatentDecomposition {
  std::vector<Eigen::MatrixXd> psi;  // psi[h] is (S * A_h) x d_h
  std::vector<Eigen::MatrixXd> nu;   // nu[h] is d_h x S
  std::vector<std::vector<std::size_t>> latent_index;  // surviving latent ids per stage
  std::vector<std::string> warnings;
};

LatentDecomposition latent_decompose(const LinearMDPFactors& factors);

}  // namespace hitl
