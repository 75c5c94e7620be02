#include "hitl/function_class.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <Eigen/Dense>

#include "hitl/errors.hpp"
#include "hitl/random.hpp"

namespace hitl {

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::VectorXd project_unit_ball(const Eigen::VectorXd& w) {
  const double norm = w.norm();
  return norm > 1.0 ? Eigen::VectorXd(w / norm) : w;
}

// argmin ||x w - t||^2 over ||w|| <= 1, minimum norm among ties. In the Gram
// eigenbasis w_i(mu) = b_i / (lambda_i + mu); mu >= 0 is found by bisection
// on ||w(mu)|| = 1 when the unconstrained solution leaves the ball.
Eigen::VectorXd ball_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(x.transpose() * x);
  const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::VectorXd b = eig.eigenvectors().transpose() * (x.transpose() * t);
  const double cutoff = 1e-10 * std::max(1.0, lambda.maxCoeff());
  auto solve = [&](double mu) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      if (lambda[i] > cutoff) v[i] = b[i] / (lambda[i] + mu);
    }
    return v;
  };
  Eigen::VectorXd v = solve(0.0);
  if (v.norm() > 1.0) {
    double lo = 0.0;
    double hi = b.norm();
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (solve(mid).norm() > 1.0 ? lo : hi) = mid;
    }
    v = solve(hi);
  }
  return eig.eigenvectors() * v;
}

double logistic_loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels,
                     const Eigen::VectorXd& w) {
  const Eigen::VectorXd margins = x * w;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < margins.size(); ++i) {
    const double r = sigmoid(margins[i]) - labels[i];
    loss += r * r;
  }
  return loss;
}

Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels,
                                  const Eigen::VectorXd& w) {
  const Eigen::VectorXd margins = x * w;
  Eigen::VectorXd weights(margins.size());
  for (Eigen::Index i = 0; i < margins.size(); ++i) {
    const double p = sigmoid(margins[i]);
    weights[i] = 2.0 * (p - labels[i]) * p * (1.0 - p);
  }
  return x.transpose() * weights;
}

// Projected gradient descent with Armijo backtracking. Stationarity is
// measured by the projected-gradient mapping at unit step.
std::pair<Eigen::VectorXd, double> logistic_descent(const Eigen::MatrixXd& x,
                                                    const Eigen::VectorXd& labels,
                                                    Eigen::VectorXd w,
                                                    const FitOptions& options) {
  double loss = logistic_loss(x, labels, w);
  double step = 1.0;
  for (int it = 0; it < options.max_iterations; ++it) {
    const Eigen::VectorXd grad = logistic_gradient(x, labels, w);
    if ((w - project_unit_ball(w - grad)).norm() < options.gradient_tolerance) break;
    step = std::min(step * 2.0, 1e6);
    Eigen::VectorXd next;
    double next_loss = loss;
    while (true) {
      next = project_unit_ball(w - step * grad);
      next_loss = logistic_loss(x, labels, next);
      if (next_loss <= loss - 1e-4 / step * (next - w).squaredNorm() || step < 1e-14) break;
      step *= 0.5;
    }
    if ((next - w).norm() < 1e-15) break;
    w = std::move(next);
    loss = next_loss;
  }
  return {w, loss};
}

using Intervals = std::vector<std::pair<double, double>>;  // half-open [lo, hi)

Intervals intersect(const Intervals& a, const Intervals& b) {
  Intervals out;
  for (const auto& [alo, ahi] : a) {
    for (const auto& [blo, bhi] : b) {
      const double lo = std::max(alo, blo);
      const double hi = std::min(ahi, bhi);
      if (lo < hi) out.emplace_back(lo, hi);
    }
  }
  return out;
}

struct EluderSearch {
  const Eigen::MatrixXd& values;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  std::size_t best = 0;

  // sq_norms[p] is ||f - f'||_Z^2 for pair p over the current prefix Z.
  void extend(std::vector<bool>& used, std::vector<double>& sq_norms, const Intervals& feasible,
              std::size_t depth) {
    best = std::max(best, depth);
    if (best == static_cast<std::size_t>(values.cols())) return;
    for (Eigen::Index z = 0; z < values.cols(); ++z) {
      if (used[static_cast<std::size_t>(z)]) continue;
      Intervals witness;
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        const double gap = std::abs(values(pairs[p].first, z) - values(pairs[p].second, z));
        const double norm = std::sqrt(sq_norms[p]);
        if (norm < gap) witness.emplace_back(norm, gap);
      }
      Intervals next = intersect(feasible, witness);
      if (next.empty()) continue;
      used[static_cast<std::size_t>(z)] = true;
      std::vector<double> next_norms = sq_norms;
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        const double gap = values(pairs[p].first, z) - values(pairs[p].second, z);
        next_norms[p] += gap * gap;
      }
      extend(used, next_norms, next, depth + 1);
      used[static_cast<std::size_t>(z)] = false;
    }
  }
};

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::linear ? "linear" : "logistic"; }

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "linear") return ModelKind::linear;
  if (name == "logistic") return ModelKind::logistic;
  throw DataError("unknown model kind: " + name);
}

double StageModel::operator()(const Eigen::VectorXd& phi) const {
  const double inner = phi.dot(weights);
  const double f = kind == ModelKind::linear ? (inner + 1.0) / 2.0 : sigmoid(inner);
  return std::clamp(f, 0.0, 1.0);
}

void to_json(json& j, const ResponseModel& model) {
  json weights = json::array();
  for (const auto& w : model.weights) weights.push_back(vector_to_json(w));
  j = json{{"kind", to_string(model.kind)},
           {"d", model.weights.empty() ? 0 : model.weights.front().size()},
           {"weights", std::move(weights)},
           {"feature_hash", model.feature_hash}};
}

ResponseModel response_model_from_json(const json& j) {
  try {
    ResponseModel model;
    model.kind = model_kind_from_string(j.at("kind").get<std::string>());
    const auto d = j.at("d").get<Eigen::Index>();
    for (const auto& w : j.at("weights")) {
      model.weights.push_back(vector_from_json(w));
      if (model.weights.back().size() != d) throw DataError("model weight length differs from d");
    }
    model.feature_hash = j.value("feature_hash", "");
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed response model: ") + e.what());
  }
}

StageModel ls_fit(ModelKind kind, const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                  const FitOptions& options) {
  if (features.rows() != labels.size()) throw DataError("feature/label count mismatch");
  StageModel model{kind, Eigen::VectorXd::Zero(features.cols())};
  if (features.rows() == 0) return model;
  if (kind == ModelKind::linear) {
    const Eigen::VectorXd targets = 2.0 * labels.array() - 1.0;
    model.weights = ball_least_squares(features, targets);
    return model;
  }
  Rng rng(options.seed);
  double best_loss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    Eigen::VectorXd start = r == 0 ? Eigen::VectorXd::Zero(features.cols())
                                   : sample_ball(features.cols(), rng);
    auto [w, loss] = logistic_descent(features, labels, std::move(start), options);
    if (loss < best_loss) {
      best_loss = loss;
      model.weights = std::move(w);
    }
  }
  return model;
}

ConfidenceSet::ConfidenceSet(ModelKind kind, Eigen::Index dim, double beta)
    : kind_(kind), beta_(beta), gram_(Eigen::MatrixXd::Zero(dim, dim)) {
  if (beta < 0) throw DataError("confidence radius must be non-negative");
  decompose();
}

ConfidenceSet::ConfidenceSet(ModelKind kind, const Eigen::MatrixXd& queried_features, double beta)
    : kind_(kind),
      beta_(beta),
      gram_(queried_features.transpose() * queried_features),
      count_(static_cast<std::size_t>(queried_features.rows())) {
  if (beta < 0) throw DataError("confidence radius must be non-negative");
  decompose();
}

ConfidenceSet ConfidenceSet::with_point(const Eigen::VectorXd& phi) const {
  ConfidenceSet next = *this;
  next.gram_ += phi * phi.transpose();
  next.count_ += 1;
  next.decompose();
  return next;
}

void ConfidenceSet::decompose() {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram_);
  eigenvalues_ = solver.eigenvalues().cwiseMax(0.0);
  eigenvectors_ = solver.eigenvectors();
}

// In the Gram eigenbasis the feasible set is the intersection of the ball
// sum v_i^2 <= 4 with the ellipsoid sum lambda_i v_i^2 <= 4 beta^2. By convex
// duality the squared maximum of <c, v> over it equals
//   min_{t in [0,1]} g(t),  g(t) = sum c_i^2 / ((1 - t) / 4 + t lambda_i / (4 beta^2)),
// and g is convex in t, so a bisection on g' finds the multiplier.
double ConfidenceSet::max_linear_gap(const Eigen::VectorXd& phi) const {
  const Eigen::VectorXd c = eigenvectors_.transpose() * phi;
  const Eigen::VectorXd c2 = c.array().square();
  const double scale = std::max(1.0, eigenvalues_.maxCoeff());
  const double zero_tol = 1e-12 * scale;

  if (beta_ == 0.0) {
    double null_mass = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      if (eigenvalues_[i] <= zero_tol) null_mass += c2[i];
    }
    return 2.0 * std::sqrt(null_mass);
  }

  const double b = 0.25;
  Eigen::VectorXd a = eigenvalues_ / (4.0 * beta_ * beta_);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (eigenvalues_[i] <= zero_tol) a[i] = 0.0;
  }
  auto g = [&](double t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      if (c2[i] == 0.0) continue;
      s += c2[i] / (b + t * (a[i] - b));
    }
    return s;
  };
  auto dg = [&](double t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      if (c2[i] == 0.0) continue;
      const double den = b + t * (a[i] - b);
      s -= c2[i] * (a[i] - b) / (den * den);
    }
    return s;
  };

  if (dg(0.0) >= 0.0) return std::sqrt(g(0.0));

  bool unbounded_at_one = false;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (a[i] == 0.0 && c2[i] > 0.0) unbounded_at_one = true;
  }
  if (!unbounded_at_one && dg(1.0) <= 0.0) return std::sqrt(g(1.0));

  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (dg(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::sqrt(std::min(g(lo), g(hi)));
}

double bonus(const ConfidenceSet& set, const Eigen::VectorXd& phi) {
  const double gap = set.max_linear_gap(phi);
  const double lipschitz = set.kind() == ModelKind::linear ? 0.5 : 0.25;
  return std::clamp(lipschitz * gap, 0.0, 1.0);
}

std::size_t query_budget(double dim_f, double margin, double delta, double c1,
                         std::size_t pool_size) {
  if (!(margin > 0.0 && margin <= 1.0)) throw DataError("margin must lie in (0, 1]");
  if (!(delta > 0.0 && delta < 1.0)) throw DataError("delta must lie in (0, 1)");
  if (dim_f < 2.0) throw DataError("dim(F) must be at least 2");
  if (c1 <= 0.0) throw DataError("C1 must be positive");
  const double log_dim = std::log(dim_f);
  const double raw =
      c1 * (dim_f * dim_f + dim_f * std::log(1.0 / delta)) * log_dim * log_dim / (margin * margin);
  // Guard against ceil() turning 3.0000000000000004 into 4.
  const double rounded = std::ceil(raw - 1e-9 * std::max(1.0, raw));
  auto n = static_cast<std::size_t>(std::max(1.0, std::min(rounded, 1e15)));
  if (pool_size > 0) n = std::min(n, pool_size);
  return n;
}

double beta_schedule(std::size_t n, double dim_f, double delta, double c2) {
  if (!(delta > 0.0 && delta < 1.0)) throw DataError("delta must lie in (0, 1)");
  if (n == 0) throw DataError("query count must be positive");
  return c2 * std::sqrt(std::log(1.0 / delta) + std::log(static_cast<double>(n)) * dim_f);
}

StageModel round_to_cover(const StageModel& model, double margin, Rounding mode) {
  if (mode == Rounding::identity) return model;
  if (!(margin > 0.0 && margin <= 1.0)) throw DataError("margin must lie in (0, 1]");
  const double grid = 2.0 * margin / std::sqrt(static_cast<double>(model.weights.size()));
  StageModel out = model;
  for (Eigen::Index i = 0; i < out.weights.size(); ++i) {
    const double snapped = grid * std::round(model.weights[i] / grid);
    if (std::abs(snapped - model.weights[i]) > 1e-12 * grid) out.weights[i] = snapped;
  }
  return out;
}

int threshold_level(double f, int levels) {
  int level = 0;
  for (int i = 1; i <= levels; ++i) {
    if (f > static_cast<double>(2 * i - 1) / (2.0 * levels)) level = i;
  }
  return level;
}

std::vector<int> RewardEstimate::stage_levels(std::size_t h, const FeatureMap& features) const {
  const auto& table = features.stage(h);
  std::vector<int> out(static_cast<std::size_t>(table.rows()));
  for (Eigen::Index row = 0; row < table.rows(); ++row) {
    out[static_cast<std::size_t>(row)] = level(h, table.row(row).transpose());
  }
  return out;
}

std::vector<std::vector<int>> RewardEstimate::levels_table(const FeatureMap& features) const {
  std::vector<std::vector<int>> out;
  for (std::size_t h = 0; h < stages.size(); ++h) out.push_back(stage_levels(h, features));
  return out;
}

void to_json(json& j, const RewardEstimate& estimate) {
  json stages = json::array();
  for (const auto& s : estimate.stages) {
    stages.push_back({{"kind", to_string(s.kind)}, {"weights", vector_to_json(s.weights)}});
  }
  j = json{{"levels", estimate.levels}, {"stages", std::move(stages)}};
}

RewardEstimate reward_estimate_from_json(const json& j) {
  try {
    RewardEstimate out;
    out.levels = j.at("levels").get<int>();
    for (const auto& s : j.at("stages")) {
      out.stages.push_back({model_kind_from_string(s.at("kind").get<std::string>()),
                            vector_from_json(s.at("weights"))});
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed reward estimate: ") + e.what());
  }
}

std::size_t eluder_dim_bruteforce(const Eigen::MatrixXd& values, double epsilon) {
  if (values.cols() > 12) throw DataError("eluder brute force supports at most 12 pool points");
  EluderSearch search{values, {}, 0};
  for (Eigen::Index f = 0; f < values.rows(); ++f) {
    for (Eigen::Index g = f + 1; g < values.rows(); ++g) search.pairs.emplace_back(f, g);
  }
  std::vector<bool> used(static_cast<std::size_t>(values.cols()), false);
  std::vector<double> sq_norms(search.pairs.size(), 0.0);
  const Intervals feasible{{epsilon, std::numeric_limits<double>::infinity()}};
  search.extend(used, sq_norms, feasible, 0);
  return search.best;
}

}  // namespace hitl
