#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "bpce/errors.hpp"

namespace bpce {

// Beta density in the mean-precision parameterization: shapes a1 = zeta*nu,
// a2 = (1-zeta)*nu.
inline double beta_log_density(double x, double zeta, double nu) {
  if (!(zeta > 0.0 && zeta < 1.0 && nu > 0.0))
    throw ConfigError("beta_log_density: requires zeta in (0,1) and nu > 0");
  if (!(x > 0.0 && x < 1.0)) throw ConfigError("beta_log_density: x must be in (0,1)");
  const double a1 = zeta * nu;
  const double a2 = (1.0 - zeta) * nu;
  const double log_beta_fn = std::lgamma(a1) + std::lgamma(a2) - std::lgamma(a1 + a2);
  return (a1 - 1.0) * std::log(x) + (a2 - 1.0) * std::log1p(-x) - log_beta_fn;
}

// Mean and variance of Beta(zeta, nu): E = zeta, Var = zeta(1-zeta)/(1+nu).
inline std::pair<double, double> beta_moments(double zeta, double nu) {
  if (!(zeta > 0.0 && zeta < 1.0 && nu > 0.0))
    throw ConfigError("beta_moments: requires zeta in (0,1) and nu > 0");
  return {zeta, zeta * (1.0 - zeta) / (1.0 + nu)};
}

// Dirichlet density on the simplex with concentration theta.
inline double dirichlet_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& theta) {
  if (x.size() != theta.size() || x.size() == 0)
    throw ConfigError("dirichlet_log_density: dimension mismatch");
  if ((theta.array() <= 0.0).any())
    throw ConfigError("dirichlet_log_density: theta must be positive");
  if ((x.array() <= 0.0).any() || std::abs(x.sum() - 1.0) > 1e-8)
    throw ConfigError("dirichlet_log_density: x must lie in the open simplex");
  double log_b = -std::lgamma(theta.sum());
  double acc = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    log_b += std::lgamma(theta[i]);
    acc += (theta[i] - 1.0) * std::log(x[i]);
  }
  return acc - log_b;
}

// Mean and variance of component i of Dirichlet(theta).
inline std::pair<double, double> dirichlet_moments(const Eigen::VectorXd& theta, int i) {
  if (i < 0 || i >= theta.size()) throw ConfigError("dirichlet_moments: index out of range");
  if ((theta.array() <= 0.0).any())
    throw ConfigError("dirichlet_moments: theta must be positive");
  const double theta0 = theta.sum();
  const double mean = theta[i] / theta0;
  return {mean, mean * (1.0 - mean) / (1.0 + theta0)};
}

// Half-normal log density on x >= 0 with scale s.
inline double half_normal_log_density(double x, double s) {
  if (!(s > 0.0)) throw ConfigError("half_normal_log_density: scale must be > 0");
  if (x < 0.0) throw ConfigError("half_normal_log_density: x must be >= 0");
  return 0.5 * std::log(2.0 / 3.14159265358979323846) - std::log(s) - 0.5 * (x / s) * (x / s);
}

// Half-normal prior scale for sigma given training responses and the prior
// mean of R^2: s_sigma = sd(y) * sqrt(1 - zeta).
inline double default_sigma_scale(const Eigen::VectorXd& y, double zeta) {
  if (y.size() < 2) throw ConfigError("default_sigma_scale: needs at least 2 responses");
  if (!(zeta >= 0.0 && zeta < 1.0))
    throw ConfigError("default_sigma_scale: requires zeta in [0,1)");
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
  if (!(var > 0.0)) throw ConfigError("default_sigma_scale: zero-variance responses");
  return std::sqrt(var) * std::sqrt(1.0 - zeta);
}

}  // namespace bpce
