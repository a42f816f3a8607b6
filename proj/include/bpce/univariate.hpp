#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>
#include <vector>

#include "bpce/errors.hpp"
#include "bpce/moments.hpp"

namespace bpce {

// Univariate orthonormal polynomials on one standardized input dimension.
// Row alpha of `coeff` holds the monomial coefficients of phi^(alpha); the
// rows are normalized so the moment-based self inner product is 1.
struct UnivariatePolySet {
  int degree = 0;
  Eigen::MatrixXd coeff;   // (degree+1) x (degree+1), lower triangular
  Eigen::VectorXd norms;   // kappa_alpha: squared norm of the monic polynomial
  AffineMap standardization;
  double hankel_condition = 1.0;  // largest condition estimate across orders

  // Horner evaluation on the standardized coordinate.
  double evaluate_standard(int alpha, double u) const {
    double acc = coeff(alpha, alpha);
    for (int i = alpha - 1; i >= 0; --i) acc = acc * u + coeff(alpha, i);
    return acc;
  }

  double evaluate(int alpha, double x_raw) const {
    return evaluate_standard(alpha, standardization.to_standard(x_raw));
  }

  // All degrees 0..degree at one standardized coordinate.
  void evaluate_all_standard(double u, Eigen::VectorXd& out) const {
    out.resize(degree + 1);
    for (int a = 0; a <= degree; ++a) out[a] = evaluate_standard(a, u);
  }
};

namespace detail {

using MatrixXld = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VectorXld = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

// <f, g> under the moment functional: sum_ij f_i g_j mu_{i+j}.
inline long double moment_inner(const VectorXld& f, const VectorXld& g,
                                const std::vector<double>& mu) {
  long double acc = 0.0L;
  for (int i = 0; i < f.size(); ++i) {
    if (f[i] == 0.0L) continue;
    long double row = 0.0L;
    for (int j = 0; j < g.size(); ++j) row += g[j] * static_cast<long double>(mu[i + j]);
    acc += f[i] * row;
  }
  return acc;
}

}  // namespace detail

inline constexpr double kHankelConditionLimit = 1e14;

// Monic-then-normalize construction from the Hankel system of moments.
// The solve runs in extended precision; the Hankel matrix condition grows
// fast with the order and the limit above is enforced per order.
inline UnivariatePolySet build_univariate(const MomentSequence& moments, int d) {
  if (d < 0) throw BasisError("build_univariate: degree must be >= 0");
  if (moments.max_degree() < d)
    throw BasisError("build_univariate: moment sequence supports degree <= " +
                     std::to_string(moments.max_degree()));
  const std::vector<double>& mu = moments.moments;

  UnivariatePolySet set;
  set.degree = d;
  set.standardization = moments.standardization;
  set.coeff = Eigen::MatrixXd::Zero(d + 1, d + 1);
  set.norms = Eigen::VectorXd::Zero(d + 1);

  detail::MatrixXld monic = detail::MatrixXld::Zero(d + 1, d + 1);
  monic(0, 0) = 1.0L;
  set.norms[0] = mu[0];  // = 1 for a probability measure
  set.coeff(0, 0) = 1.0 / std::sqrt(static_cast<double>(set.norms[0]));

  for (int alpha = 1; alpha <= d; ++alpha) {
    detail::MatrixXld a(alpha, alpha);
    detail::VectorXld rhs(alpha);
    for (int p = 0; p < alpha; ++p) {
      for (int i = 0; i < alpha; ++i) a(p, i) = static_cast<long double>(mu[p + i]);
      rhs[p] = -static_cast<long double>(mu[p + alpha]);
    }
    Eigen::LLT<detail::MatrixXld> llt(a);
    if (llt.info() != Eigen::Success)
      throw BasisError("Hankel matrix of moments is not positive definite at order " +
                       std::to_string(alpha));
    const long double rcond = llt.rcond();
    const double condition = static_cast<double>(1.0L / std::max(rcond, 1e-300L));
    if (!(rcond > 0.0L) || condition > kHankelConditionLimit)
      throw BasisError("Hankel matrix condition number exceeds 1e14 at order " +
                       std::to_string(alpha) + " (estimated " + std::to_string(condition) +
                       ")");
    set.hankel_condition = std::max(set.hankel_condition, condition);

    detail::VectorXld lower = llt.solve(rhs);
    detail::VectorXld q = detail::VectorXld::Zero(alpha + 1);
    q.head(alpha) = lower;
    q[alpha] = 1.0L;

    const long double norm_sq = detail::moment_inner(q, q, mu);
    if (!(norm_sq > 0.0L)) throw BasisError("moment matrix numerically singular");
    set.norms[alpha] = static_cast<double>(norm_sq);
    const long double inv_norm = 1.0L / std::sqrt(norm_sq);
    monic.row(alpha).head(alpha + 1) = q.transpose();
    for (int i = 0; i <= alpha; ++i) set.coeff(alpha, i) = static_cast<double>(q[i] * inv_norm);
  }
  return set;
}

// Moment-based Gram matrix of an orthonormal set; identity up to the
// construction error.  Used by tests and basis validation.
inline Eigen::MatrixXd gram_matrix(const UnivariatePolySet& set, const MomentSequence& moments) {
  const int n = set.degree + 1;
  Eigen::MatrixXd g(n, n);
  for (int p = 0; p < n; ++p) {
    detail::VectorXld fp = set.coeff.row(p).head(p + 1).transpose().cast<long double>();
    for (int q = 0; q <= p; ++q) {
      detail::VectorXld fq = set.coeff.row(q).head(q + 1).transpose().cast<long double>();
      g(p, q) = g(q, p) = static_cast<double>(detail::moment_inner(fp, fq, moments.moments));
    }
  }
  return g;
}

// Three-term recurrence coefficients of the monic orthogonal polynomials,
// recovered by the Stieltjes procedure on the moment functional.
struct Recurrence {
  Eigen::VectorXd alpha;  // a_0 .. a_{n-1}
  Eigen::VectorXd beta;   // b_1 .. b_{n-1} (monic recurrence, all > 0)
};

inline Recurrence stieltjes_recurrence(const MomentSequence& moments, int n) {
  if (n < 1) throw BasisError("stieltjes_recurrence: n must be >= 1");
  if (moments.max_degree() < n)
    throw BasisError("stieltjes_recurrence: needs moments up to order " + std::to_string(2 * n));
  const std::vector<double>& mu = moments.moments;

  Recurrence rec;
  rec.alpha.resize(n);
  rec.beta.resize(std::max(n - 1, 0));

  detail::VectorXld prev = detail::VectorXld::Zero(1);  // p_{-1} = 0
  detail::VectorXld curr = detail::VectorXld::Zero(1);  // p_0 = 1
  curr[0] = 1.0L;
  long double norm_prev = 1.0L;
  long double norm_curr = detail::moment_inner(curr, curr, mu);  // = mu_0

  for (int k = 0; k < n; ++k) {
    detail::VectorXld x_curr = detail::VectorXld::Zero(curr.size() + 1);
    x_curr.tail(curr.size()) = curr;
    const long double a_k = detail::moment_inner(x_curr, curr, mu) / norm_curr;
    rec.alpha[k] = static_cast<double>(a_k);
    long double b_k = 0.0L;
    if (k > 0) {
      b_k = norm_curr / norm_prev;
      rec.beta[k - 1] = static_cast<double>(b_k);
      if (!(rec.beta[k - 1] > 0.0)) throw BasisError("quadrature construction failed");
    }
    // p_{k+1} = (x - a_k) p_k - b_k p_{k-1}
    detail::VectorXld next = detail::VectorXld::Zero(curr.size() + 1);
    next.tail(curr.size()) += curr;  // x * p_k
    next.head(curr.size()) -= a_k * curr;
    if (k > 0) next.head(prev.size()) -= b_k * prev;
    prev = curr;
    curr = next;
    norm_prev = norm_curr;
    norm_curr = detail::moment_inner(curr, curr, mu);
    if (k + 1 < n && !(norm_curr > 0.0L)) throw BasisError("quadrature construction failed");
  }
  return rec;
}

// Gauss nodes for the measure behind `moments`: eigenvalues of the Jacobi
// matrix (Golub-Welsch), mapped back to the raw input domain.
inline std::vector<double> gauss_nodes(const MomentSequence& moments, int n) {
  if (n < 1) throw BasisError("gauss_nodes: n must be >= 1");
  Recurrence rec = stieltjes_recurrence(moments, n);

  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) jacobi(k, k) = rec.alpha[k];
  for (int k = 0; k + 1 < n; ++k) {
    if (!(rec.beta[k] > 0.0)) throw BasisError("quadrature construction failed");
    const double off = std::sqrt(rec.beta[k]);
    jacobi(k, k + 1) = jacobi(k + 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  if (eig.info() != Eigen::Success) throw BasisError("quadrature construction failed");
  Eigen::VectorXd nodes = eig.eigenvalues();  // ascending

  const double span = std::max(nodes[n - 1] - nodes[0], 1.0);
  for (int k = 0; k + 1 < n; ++k)
    if (nodes[k + 1] - nodes[k] < 1e-12 * span) throw BasisError("quadrature construction failed");

  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) out[k] = moments.standardization.from_standard(nodes[k]);
  return out;
}

}  // namespace bpce
