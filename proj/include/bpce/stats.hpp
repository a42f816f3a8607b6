#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "bpce/errors.hpp"

namespace bpce {

inline double mean_of(const Eigen::VectorXd& x) { return x.mean(); }

inline double sd_of(const Eigen::VectorXd& x) {
  if (x.size() < 2) return 0.0;
  return std::sqrt((x.array() - x.mean()).square().sum() / (x.size() - 1));
}

// Type-7 (linear interpolation) empirical quantile of an unsorted sample.
inline double empirical_quantile(Eigen::VectorXd x, double p) {
  if (x.size() == 0) throw ShapeError("empirical_quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("empirical_quantile: p must be in [0,1]");
  std::sort(x.data(), x.data() + x.size());
  const double pos = p * (x.size() - 1);
  const long lo = static_cast<long>(std::floor(pos));
  const long hi = std::min<long>(lo + 1, x.size() - 1);
  const double w = pos - lo;
  return (1.0 - w) * x[lo] + w * x[hi];
}

}  // namespace bpce
