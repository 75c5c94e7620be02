#pragma once

// Independent reference computations used as test oracles. Nothing here calls
// the planners or the dual bonus search it is checked against.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "hitl/env.hpp"
#include "hitl/mdp.hpp"
#include "hitl/random.hpp"

namespace hitl::testing {

inline TabularMDP random_mdp(std::size_t S, std::vector<std::size_t> actions, int levels,
                             std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Eigen::MatrixXd> p;
  std::vector<std::vector<int>> r;
  for (auto a : actions) {
    Eigen::MatrixXd t(static_cast<Eigen::Index>(S * a), static_cast<Eigen::Index>(S));
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      t.row(i) = sample_simplex(static_cast<Eigen::Index>(S), rng).transpose();
    }
    p.push_back(std::move(t));
    std::vector<int> stage;
    for (std::size_t i = 0; i < S * a; ++i) {
      stage.push_back(std::uniform_int_distribution<int>(0, levels)(rng));
    }
    r.push_back(std::move(stage));
  }
  return TabularMDP(S, std::move(actions), std::move(p), std::move(r), levels, 0);
}

// Value of a deterministic policy by forward propagation of the state law.
inline double forward_value(const TabularMDP& mdp, const Policy& pi, const RewardTable& r) {
  const auto S = static_cast<Eigen::Index>(mdp.num_states());
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(S);
  mu[static_cast<Eigen::Index>(mdp.initial_state())] = 1.0;
  double total = 0.0;
  for (std::size_t h = 0; h < mdp.horizon(); ++h) {
    Eigen::RowVectorXd next = Eigen::RowVectorXd::Zero(S);
    for (Eigen::Index s = 0; s < S; ++s) {
      const auto a = pi(h, static_cast<std::size_t>(s));
      const auto p = static_cast<Eigen::Index>(mdp.pair_index(h, static_cast<std::size_t>(s), a));
      total += mu[s] * r[h][p];
      next += mu[s] * mdp.transitions(h).row(p);
    }
    mu = next;
  }
  return total;
}

inline void for_each_policy(const TabularMDP& mdp, const std::function<void(const Policy&)>& fn) {
  const std::size_t S = mdp.num_states();
  Policy pi;
  pi.actions.assign(mdp.horizon(), std::vector<std::size_t>(S, 0));
  while (true) {
    fn(pi);
    std::size_t h = 0;
    std::size_t s = 0;
    for (;;) {
      if (++pi.actions[h][s] < mdp.num_actions(h)) break;
      pi.actions[h][s] = 0;
      if (++s == S) {
        s = 0;
        if (++h == mdp.horizon()) return;
      }
    }
  }
}

// Best value over every deterministic Markov policy.
inline double enumerate_optimal(const TabularMDP& mdp, const RewardTable& r) {
  double best = -std::numeric_limits<double>::infinity();
  for_each_policy(mdp, [&](const Policy& pi) { best = std::max(best, forward_value(mdp, pi, r)); });
  return best;
}

// max |phi^T u| over ||u|| <= 2 and u^T G u / 4 <= beta^2 by sampling
// directions (largest feasible point on each ray) and hill-climbing the best.
inline double brute_force_gap(const Eigen::MatrixXd& gram, double beta, const Eigen::VectorXd& phi,
                              Rng& rng, int samples = 200000) {
  const Eigen::Index d = phi.size();
  auto ray = [&](const Eigen::VectorXd& v) {
    const double q = v.dot(gram * v);
    const double t = q > 0.0 ? std::min(2.0, 2.0 * beta / std::sqrt(q)) : 2.0;
    return std::abs(phi.dot(v)) * t;
  };
  Eigen::VectorXd best_v = sample_sphere(d, rng);
  double best = ray(best_v);
  for (int i = 0; i < samples; ++i) {
    Eigen::VectorXd v = sample_sphere(d, rng);
    const double val = ray(v);
    if (val > best) {
      best = val;
      best_v = v;
    }
  }
  for (double step = 0.1; step > 1e-9; step *= 0.7) {
    for (int i = 0; i < 200; ++i) {
      Eigen::VectorXd v = (best_v + step * sample_sphere(d, rng)).normalized();
      const double val = ray(v);
      if (val > best) {
        best = val;
        best_v = v;
      }
    }
  }
  return best;
}

}  // namespace hitl::testing
