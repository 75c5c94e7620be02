#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace hitl {

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Inverse-CDF draw from a probability vector. The last index with positive
// mass absorbs rounding slack.
template <class Probabilities>
std::size_t sample_index(const Probabilities& p, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last_positive = static_cast<std::size_t>(i);
    acc += p[i];
    if (u < acc) return last_positive;
  }
  return last_positive;
}

// Uniform draw from the probability simplex, i.e. Dirichlet(1, ..., 1).
Eigen::VectorXd sample_simplex(Eigen::Index dim, Rng& rng);

// Uniform draw from the unit sphere in R^dim.
Eigen::VectorXd sample_sphere(Eigen::Index dim, Rng& rng);

// Uniform draw from the unit ball in R^dim.
Eigen::VectorXd sample_ball(Eigen::Index dim, Rng& rng);

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return seed ^ index;
}

}  // namespace hitl
