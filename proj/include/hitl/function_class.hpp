#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "hitl/features.hpp"
#include "hitl/json.hpp"

namespace hitl {

enum class ModelKind { linear, logistic };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// One stage of a response model. Linear: f = (<phi, w> + 1) / 2, logistic:
// f = sigmoid(<phi, w>). Values are clamped into [0, 1] so that models
// rounded slightly outside the unit weight ball still read as probabilities.
struct StageModel {
  ModelKind kind = ModelKind::linear;
  Eigen::VectorXd weights;

  double operator()(const Eigen::VectorXd& phi) const;
};

// The human response function f*_h for every stage.
struct ResponseModel {
  ModelKind kind = ModelKind::linear;
  std::vector<Eigen::VectorXd> weights;
  std::string feature_hash;

  StageModel stage(std::size_t h) const { return {kind, weights[h]}; }
  double operator()(std::size_t h, const Eigen::VectorXd& phi) const { return stage(h)(phi); }
};

void to_json(json& j, const ResponseModel& model);
ResponseModel response_model_from_json(const json& j);

struct FitOptions {
  int restarts = 10;
  int max_iterations = 20000;
  double gradient_tolerance = 1e-8;
  std::uint64_t seed = 0;
};

// Least-squares fit of one stage's response model to labels in [0, 1].
// Linear: exact least squares for targets 2l - 1 over the unit ball.
// Logistic: projected gradient descent with random restarts.
StageModel ls_fit(ModelKind kind, const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                  const FitOptions& options = {});

// The pair set {(f, f') : ||f - f'||_Z <= beta} over the weight ball, held as
// the Gram matrix of the query features and its eigendecomposition.
class ConfidenceSet {
 public:
  ConfidenceSet(ModelKind kind, Eigen::Index dim, double beta);
  ConfidenceSet(ModelKind kind, const Eigen::MatrixXd& queried_features, double beta);

  ModelKind kind() const { return kind_; }
  double beta() const { return beta_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  std::size_t size() const { return count_; }

  ConfidenceSet with_point(const Eigen::VectorXd& phi) const;

  // max |phi^T u| subject to (1/4) u^T G u <= beta^2 and ||u|| <= 2.
  double max_linear_gap(const Eigen::VectorXd& phi) const;

 private:
  void decompose();

  ModelKind kind_;
  double beta_;
  Eigen::MatrixXd gram_;
  std::size_t count_ = 0;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
};

// sup |f(z) - f'(z)| over the confidence set, clipped to [0, 1].
double bonus(const ConfidenceSet& set, const Eigen::VectorXd& phi);

struct QueryBudget {
  double dim_f = 2.0;
  double c1 = 1.0;
  double c2 = 1.0;
};

// ceil(C1 (dim^2 + dim ln(1/delta)) ln^2(dim) / margin^2), capped at pool_size
// when pool_size > 0.
std::size_t query_budget(double dim_f, double margin, double delta, double c1,
                         std::size_t pool_size = 0);

// C2 sqrt(ln(1/delta) + ln(N) dim).
double beta_schedule(std::size_t n, double dim_f, double delta, double c2);

enum class Rounding { cover, identity };

// Snap weights to the grid 2 margin / sqrt(d) so that the rounded model is
// within margin / 2 of the input in sup norm.
StageModel round_to_cover(const StageModel& model, double margin,
                          Rounding mode = Rounding::cover);

// Reward level k in {0..levels} for a response value f: level i when
// f is in ((2i - 1) / 2n, (2i + 1) / 2n], with 0 on [0, 1/2n].
int threshold_level(double f, int levels);

// Per-stage thresholded classifier built from a (rounded) response model.
struct RewardEstimate {
  int levels = 1;
  std::vector<StageModel> stages;

  int level(std::size_t h, const Eigen::VectorXd& phi) const {
    return threshold_level(stages[h](phi), levels);
  }
  std::vector<int> stage_levels(std::size_t h, const FeatureMap& features) const;
  std::vector<std::vector<int>> levels_table(const FeatureMap& features) const;
};

void to_json(json& j, const RewardEstimate& estimate);
RewardEstimate reward_estimate_from_json(const json& j);

// Exact eluder dimension of a finite class tabulated on a small pool.
// values(f, z) is the value of class member f at pool point z.
std::size_t eluder_dim_bruteforce(const Eigen::MatrixXd& values, double epsilon);

}  // namespace hitl
