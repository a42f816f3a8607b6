#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "bpce/errors.hpp"

namespace bpce {

// Affine standardization of one input dimension: standard = (x - shift) / scale.
struct AffineMap {
  double shift = 0.0;
  double scale = 1.0;
  double to_standard(double x) const { return (x - shift) / scale; }
  double from_standard(double u) const { return shift + scale * u; }
};

// Raw moments mu_0..mu_{2d} of one standardized input dimension.
struct MomentSequence {
  enum class Source { AnalyticFamily, EmpiricalFromSamples };

  int dimension = 0;
  std::vector<double> moments;  // mu_0 .. mu_{2*max_degree}
  Source source = Source::AnalyticFamily;
  AffineMap standardization;

  int max_degree() const { return static_cast<int>((moments.size() - 1) / 2); }
};

namespace detail {

// Hankel matrix of moments H[p][q] = mu_{p+q}, size (order+1)^2.
// Built in extended precision; high-order moment systems shed many digits.
inline Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> hankel_matrix(
    const std::vector<double>& mu, int order) {
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> h(order + 1, order + 1);
  for (int p = 0; p <= order; ++p)
    for (int q = 0; q <= order; ++q) h(p, q) = static_cast<long double>(mu[p + q]);
  return h;
}

inline bool hankel_positive_definite(const std::vector<double>& mu, int order) {
  auto h = hankel_matrix(mu, order);
  Eigen::LLT<Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>> llt(h);
  return llt.info() == Eigen::Success;
}

}  // namespace detail

// Empirical raw moments after rescaling samples to [-1, 1].  Kahan summation
// keeps the 2d-th powers from losing digits.
inline MomentSequence moments_from_samples(std::span<const double> samples, int max_degree,
                                           int dimension = 0) {
  if (samples.empty()) throw BasisError("moments_from_samples: empty sample set");
  if (max_degree < 1) throw BasisError("moments_from_samples: max_degree must be >= 1");
  const auto [min_it, max_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *min_it, hi = *max_it;
  if (!(hi > lo)) throw BasisError("degenerate input distribution");

  MomentSequence seq;
  seq.dimension = dimension;
  seq.source = MomentSequence::Source::EmpiricalFromSamples;
  seq.standardization = AffineMap{0.5 * (hi + lo), 0.5 * (hi - lo)};

  const int n_moments = 2 * max_degree + 1;
  std::vector<double> sum(n_moments, 0.0), comp(n_moments, 0.0);
  for (double x : samples) {
    const double u = seq.standardization.to_standard(x);
    double power = 1.0;
    for (int k = 0; k < n_moments; ++k) {
      const double y = power - comp[k];
      const double t = sum[k] + y;
      comp[k] = (t - sum[k]) - y;
      sum[k] = t;
      power *= u;
    }
  }
  seq.moments.resize(n_moments);
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  for (int k = 0; k < n_moments; ++k) seq.moments[k] = sum[k] * inv_n;
  seq.moments[0] = 1.0;

  if (!detail::hankel_positive_definite(seq.moments, max_degree))
    throw BasisError("Hankel matrix of moments is not positive definite");
  return seq;
}

// Exact raw moments of uniform[a,b] after standardization to [-1, 1]:
// mu_k = 1/(k+1) for even k, 0 for odd k.
inline MomentSequence moments_uniform(double a, double b, int max_degree, int dimension = 0) {
  if (!(b > a)) throw BasisError("moments_uniform: requires b > a");
  if (max_degree < 0) throw BasisError("moments_uniform: max_degree must be >= 0");
  MomentSequence seq;
  seq.dimension = dimension;
  seq.source = MomentSequence::Source::AnalyticFamily;
  seq.standardization = AffineMap{0.5 * (a + b), 0.5 * (b - a)};
  seq.moments.resize(2 * std::max(max_degree, 1) + 1);
  for (std::size_t k = 0; k < seq.moments.size(); ++k)
    seq.moments[k] = (k % 2 == 0) ? 1.0 / static_cast<double>(k + 1) : 0.0;
  return seq;
}

// Exact raw moments of gaussian(mean, sd) after standardization to mean 0,
// unit variance: mu_k = (k-1)!! for even k, 0 for odd k.
inline MomentSequence moments_gaussian(double mean, double sd, int max_degree, int dimension = 0) {
  if (!(sd > 0.0)) throw BasisError("moments_gaussian: requires sd > 0");
  if (max_degree < 0) throw BasisError("moments_gaussian: max_degree must be >= 0");
  MomentSequence seq;
  seq.dimension = dimension;
  seq.source = MomentSequence::Source::AnalyticFamily;
  seq.standardization = AffineMap{mean, sd};
  seq.moments.resize(2 * std::max(max_degree, 1) + 1);
  seq.moments[0] = 1.0;
  if (seq.moments.size() > 1) seq.moments[1] = 0.0;
  for (std::size_t k = 2; k < seq.moments.size(); ++k)
    seq.moments[k] = (k % 2 == 0) ? static_cast<double>(k - 1) * seq.moments[k - 2] : 0.0;
  return seq;
}

}  // namespace bpce
