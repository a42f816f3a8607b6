#pragma once

#include <Eigen/Dense>
#include <string>

#include "bpce/basis.hpp"
#include "bpce/errors.hpp"

namespace bpce {

// Deterministic expansion-coefficient fit.
struct DeterministicFit {
  enum class Method { Exact, LeastSquares, Ridge };
  Eigen::VectorXd coeffs;
  Method method = Method::Exact;
  double lambda = 0.0;
  double residual_norm = 0.0;
};

inline const char* method_name(DeterministicFit::Method m) {
  switch (m) {
    case DeterministicFit::Method::Exact: return "exact";
    case DeterministicFit::Method::LeastSquares: return "least-squares";
    case DeterministicFit::Method::Ridge: return "ridge";
  }
  return "unknown";
}

inline constexpr double kRankTolerance = 1e-12;  // sigma_min / sigma_max threshold

// Fully determined system: T = M, c = Psi^{-1} y via LU.
inline DeterministicFit solve_exact(const Eigen::MatrixXd& psi, const Eigen::VectorXd& y) {
  if (psi.rows() != psi.cols())
    throw ShapeError("solve_exact: requires a square system (T = M), got " +
                     std::to_string(psi.rows()) + " x " + std::to_string(psi.cols()));
  if (y.size() != psi.rows()) throw ShapeError("solve_exact: response length mismatch");

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(psi);
  DeterministicFit fit;
  fit.method = DeterministicFit::Method::Exact;
  fit.coeffs = lu.solve(y);
  fit.residual_norm = (psi * fit.coeffs - y).norm();
  const double rcond = lu.rcond();
  if (!(fit.residual_norm <= 1e-8 * std::max(y.norm(), 1e-300)))
    throw ShapeError("solve_exact: design matrix numerically singular (condition estimate " +
                     std::to_string(1.0 / std::max(rcond, 1e-300)) + ")");
  return fit;
}

// Overdetermined least squares via QR; rank deficiency is rejected.
inline DeterministicFit solve_least_squares(const Eigen::MatrixXd& psi, const Eigen::VectorXd& y) {
  if (psi.rows() < psi.cols())
    throw ShapeError("solve_least_squares: requires T >= M");
  if (y.size() != psi.rows()) throw ShapeError("solve_least_squares: response length mismatch");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(psi);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[sv.size() - 1] < kRankTolerance * sv[0])
    throw ShapeError("solve_least_squares: design matrix is rank deficient; use solve_ridge");

  DeterministicFit fit;
  fit.method = DeterministicFit::Method::LeastSquares;
  fit.coeffs = psi.colPivHouseholderQr().solve(y);
  fit.residual_norm = (psi * fit.coeffs - y).norm();
  return fit;
}

// Ridge-regularized normal equations; valid for any T, M when lambda > 0.
inline DeterministicFit solve_ridge(const Eigen::MatrixXd& psi, const Eigen::VectorXd& y,
                                    double lambda) {
  if (!(lambda >= 0.0)) throw ShapeError("solve_ridge: lambda must be >= 0");
  if (y.size() != psi.rows()) throw ShapeError("solve_ridge: response length mismatch");

  Eigen::MatrixXd gram = psi.transpose() * psi;
  gram.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  const bool singular =
      llt.info() != Eigen::Success || (lambda == 0.0 && llt.rcond() < 1e-14);
  if (singular)
    throw ShapeError(lambda == 0.0 ? "solve_ridge: Psi^T Psi singular at lambda = 0"
                                   : "solve_ridge: normal equations not positive definite");

  DeterministicFit fit;
  fit.method = DeterministicFit::Method::Ridge;
  fit.lambda = lambda;
  fit.coeffs = llt.solve(psi.transpose() * y);
  fit.residual_norm = (psi * fit.coeffs - y).norm();
  return fit;
}

inline DeterministicFit solve_exact(const DesignMatrix& design, const Eigen::VectorXd& y) {
  return solve_exact(design.values, y);
}
inline DeterministicFit solve_least_squares(const DesignMatrix& design, const Eigen::VectorXd& y) {
  return solve_least_squares(design.values, y);
}
inline DeterministicFit solve_ridge(const DesignMatrix& design, const Eigen::VectorXd& y,
                                    double lambda) {
  return solve_ridge(design.values, y, lambda);
}

}  // namespace bpce
