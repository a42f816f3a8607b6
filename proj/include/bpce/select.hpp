#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bpce/basis.hpp"
#include "bpce/detsolve.hpp"
#include "bpce/errors.hpp"
#include "bpce/fit.hpp"
#include "bpce/posterior.hpp"

namespace bpce {

// Exactly sparse subset of a fitted reference model.
struct SelectionResult {
  enum class Method { SobolGreedy, Projpred };
  Method method = Method::SobolGreedy;
  int m_sel = 0;
  std::vector<int> indices;      // selected basis indices, constant term first
  std::vector<int> path_order;   // projpred: entry order of non-constant terms
  std::vector<double> entry_lambda;  // projpred: lambda at first entry
  Eigen::VectorXd projection;    // projpred: least-squares refit on selection
  bool truncated_path = false;   // path exhausted before m_sel entrants
};

inline const char* method_name(SelectionResult::Method m) {
  return m == SelectionResult::Method::SobolGreedy ? "sobol-greedy" : "projpred";
}

// l1-regularized entry order on standardized columns: cyclic coordinate
// descent over a 100-point logarithmic lambda grid from lambda_max down to
// 1e-4 * lambda_max, recording each coefficient at its first nonzero.
struct LassoPath {
  std::vector<int> entry_order;       // column indices in entry order
  std::vector<double> entry_lambda;   // lambda at first entry
  std::vector<double> lambda_grid;
};

inline LassoPath lasso_entry_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                  int n_lambda = 100, double lambda_min_ratio = 1e-4) {
  const long t = x.rows();
  const long p = x.cols();
  if (y.size() != t) throw ShapeError("lasso_entry_path: response length mismatch");
  if (t < 2) throw ShapeError("lasso_entry_path: needs at least 2 rows");

  // Center the response (the intercept is never penalized) and standardize
  // the columns to unit empirical variance.
  const Eigen::VectorXd yc = y.array() - y.mean();
  Eigen::MatrixXd xs(t, p);
  std::vector<char> active_ok(p, 1);
  Eigen::VectorXd col_scale(p);
  for (long j = 0; j < p; ++j) {
    Eigen::VectorXd col = x.col(j).array() - x.col(j).mean();
    const double scale = std::sqrt(col.squaredNorm() / t);
    col_scale[j] = scale;
    if (scale < 1e-14) {
      active_ok[j] = 0;
      xs.col(j).setZero();
    } else {
      xs.col(j) = col / scale;
    }
  }

  double lambda_max = 0.0;
  for (long j = 0; j < p; ++j)
    if (active_ok[j]) lambda_max = std::max(lambda_max, std::abs(xs.col(j).dot(yc)) / t);
  LassoPath path;
  if (lambda_max <= 0.0) return path;  // response constant: nothing can enter

  path.lambda_grid.resize(n_lambda);
  const double log_span = std::log(lambda_min_ratio);
  for (int k = 0; k < n_lambda; ++k)
    path.lambda_grid[k] = lambda_max * std::exp(log_span * k / (n_lambda - 1));

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd resid = yc;
  std::vector<char> entered(p, 0);
  const double tol = 1e-9 * std::max(1.0, sd_of(yc));

  for (double lambda : path.lambda_grid) {
    for (int sweep = 0; sweep < 10000; ++sweep) {
      double max_change = 0.0;
      for (long j = 0; j < p; ++j) {
        if (!active_ok[j]) continue;
        const double old = beta[j];
        const double rho = xs.col(j).dot(resid) / t + old;  // partial residual fit
        const double next = std::abs(rho) <= lambda ? 0.0
                                                    : (rho > 0 ? rho - lambda : rho + lambda);
        if (next != old) {
          resid -= (next - old) * xs.col(j);
          beta[j] = next;
          max_change = std::max(max_change, std::abs(next - old));
          if (next != 0.0 && !entered[j]) {
            entered[j] = 1;
            path.entry_order.push_back(static_cast<int>(j));
            path.entry_lambda.push_back(lambda);
          }
        }
      }
      if (max_change < tol) break;
    }
  }
  return path;
}

// Greedy selection: the M_sel non-constant terms with the largest
// posterior-mean Sobol indices, plus the constant term.
inline SelectionResult select_sobol(const SobolReport& report, int m_sel) {
  const int k = static_cast<int>(report.basis_index.size());
  if (m_sel < 1 || m_sel >= k + 1)
    throw ShapeError("select_sobol: M_sel must be in [1, M-1]");
  SelectionResult sel;
  sel.method = SelectionResult::Method::SobolGreedy;
  sel.m_sel = m_sel;
  sel.indices.push_back(0);
  for (int r = 0; r < m_sel; ++r)
    sel.indices.push_back(report.basis_index[report.ranking[r]]);
  return sel;
}

// Projective prediction with a single cluster: project the reference
// model's posterior-mean prediction, trace the l1 path for the search
// order, then report the least-squares projection on the selection.
inline SelectionResult select_projpred(const PosteriorDraws& draws, const DesignMatrix& design,
                                       int m_sel) {
  const int m = static_cast<int>(design.values.cols());
  if (m_sel < 1 || m_sel >= m) throw ShapeError("select_projpred: M_sel must be in [1, M-1]");
  if (draws.coef_cols.size() != static_cast<std::size_t>(m))
    throw ShapeError("select_projpred: draws do not match the design");

  Eigen::VectorXd coef_mean(m);
  for (int i = 0; i < m; ++i) coef_mean[i] = draws.draws.col(draws.coef_cols[i]).mean();
  const Eigen::VectorXd cluster_center = design.values * coef_mean;

  const LassoPath path =
      lasso_entry_path(design.values.rightCols(m - 1), cluster_center);

  SelectionResult sel;
  sel.method = SelectionResult::Method::Projpred;
  sel.m_sel = m_sel;
  sel.indices.push_back(0);
  const int takes = std::min<int>(m_sel, static_cast<int>(path.entry_order.size()));
  for (int r = 0; r < takes; ++r) {
    const int col = path.entry_order[r] + 1;  // shift past the constant column
    sel.indices.push_back(draws.coef_labels[col]);
    sel.path_order.push_back(draws.coef_labels[col]);
    sel.entry_lambda.push_back(path.entry_lambda[r]);
  }
  sel.truncated_path = takes < m_sel;

  // Gaussian-family KL minimizer: least squares of the cluster center on the
  // selected columns (diagnostic only; inference comes from the refit).
  Eigen::MatrixXd sub(design.values.rows(), sel.indices.size());
  for (std::size_t i = 0; i < sel.indices.size(); ++i) {
    int col = -1;
    for (int j = 0; j < m; ++j)
      if (draws.coef_labels[j] == sel.indices[i]) col = j;
    sub.col(i) = design.values.col(col);
  }
  sel.projection = sub.colPivHouseholderQr().solve(cluster_center);
  return sel;
}

// Reduced design over the selected columns, refit with the same prior family.
inline FitResult refit_sparse(const SelectionResult& selection, const DesignMatrix& design,
                              const Eigen::VectorXd& y, const R2D2Config& prior,
                              const SamplerConfig& sampler_cfg) {
  if (selection.indices.empty() || selection.indices.front() != 0)
    throw ShapeError("refit_sparse: selection must include the constant term first");
  const int m = static_cast<int>(design.values.cols());
  Eigen::MatrixXd sub(design.values.rows(), selection.indices.size());
  std::vector<int> labels;
  labels.reserve(selection.indices.size());
  for (std::size_t i = 0; i < selection.indices.size(); ++i) {
    const int idx = selection.indices[i];
    if (idx < 0 || idx >= m) throw ShapeError("refit_sparse: selection index out of range");
    sub.col(i) = design.values.col(idx);
    labels.push_back(idx);
  }
  R2D2Config sub_prior = prior;
  sub_prior.theta.resize(0);  // uniform simplex prior sized to the subset
  return fit_r2d2(sub, y, sub_prior, sampler_cfg, std::move(labels));
}

}  // namespace bpce
