#include "hitl/random.hpp"

#include <cmath>

namespace hitl {

Eigen::VectorXd sample_simplex(Eigen::Index dim, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = expo(rng);
  return v / v.sum();
}

Eigen::VectorXd sample_sphere(Eigen::Index dim, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(dim);
  double norm = 0.0;
  while (norm < 1e-12) {
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = gauss(rng);
    norm = v.norm();
  }
  return v / norm;
}

Eigen::VectorXd sample_ball(Eigen::Index dim, Rng& rng) {
  const double radius = std::pow(uniform01(rng), 1.0 / static_cast<double>(dim));
  return radius * sample_sphere(dim, rng);
}

}  // namespace hitl
