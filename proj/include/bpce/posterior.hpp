#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "bpce/basis.hpp"
#include "bpce/errors.hpp"
#include "bpce/rng.hpp"
#include "bpce/sampler.hpp"
#include "bpce/stats.hpp"

namespace bpce {

// Per-term Sobol indices summarized over posterior draws.
struct SobolReport {
  std::vector<int> basis_index;    // label of each non-constant term
  Eigen::VectorXd mean;            // posterior-mean index per term
  Eigen::VectorXd ci95_low, ci95_high;
  Eigen::VectorXd ci99_low, ci99_high;
  std::vector<int> ranking;        // positions into the vectors above, best first
  Eigen::VectorXd cumulative;      // cumulative mean index along the ranking
  int excluded_draws = 0;          // draws with all-zero coefficients
};

// Sobol index per draw: S_i = c_i^2 / sum_{i'>=1} c_{i'}^2 over the
// non-constant coefficients; summaries use equal-tailed empirical quantiles.
inline SobolReport sobol_indices(const PosteriorDraws& draws) {
  if (draws.coef_cols.size() < 2)
    throw ShapeError("sobol_indices: draws carry no non-constant coefficients");
  const int k = static_cast<int>(draws.coef_cols.size()) - 1;
  const long s_total = draws.n_draws();

  Eigen::MatrixXd per_draw(s_total, k);
  int excluded = 0;
  long kept = 0;
  for (long s = 0; s < s_total; ++s) {
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
      const double c = draws.draws(s, draws.coef_cols[i + 1]);
      per_draw(kept, i) = c * c;
      total += c * c;
    }
    if (total <= 0.0) {
      ++excluded;
      continue;
    }
    per_draw.row(kept) /= total;
    ++kept;
  }
  if (kept == 0) throw ShapeError("sobol_indices: every draw has all-zero coefficients");
  per_draw.conservativeResize(kept, k);

  SobolReport report;
  report.excluded_draws = excluded;
  report.basis_index.resize(k);
  for (int i = 0; i < k; ++i) report.basis_index[i] = draws.coef_labels[i + 1];
  report.mean = per_draw.colwise().mean();
  report.ci95_low.resize(k);
  report.ci95_high.resize(k);
  report.ci99_low.resize(k);
  report.ci99_high.resize(k);
  for (int i = 0; i < k; ++i) {
    const Eigen::VectorXd col = per_draw.col(i);
    report.ci95_low[i] = empirical_quantile(col, 0.025);
    report.ci95_high[i] = empirical_quantile(col, 0.975);
    report.ci99_low[i] = empirical_quantile(col, 0.005);
    report.ci99_high[i] = empirical_quantile(col, 0.995);
  }

  report.ranking.resize(k);
  std::iota(report.ranking.begin(), report.ranking.end(), 0);
  std::sort(report.ranking.begin(), report.ranking.end(), [&](int a, int b) {
    if (report.mean[a] != report.mean[b]) return report.mean[a] > report.mean[b];
    return report.basis_index[a] < report.basis_index[b];
  });
  report.cumulative.resize(k);
  double acc = 0.0;
  for (int r = 0; r < k; ++r) {
    acc += report.mean[report.ranking[r]];
    report.cumulative[r] = acc;
  }
  return report;
}

struct MomentEstimate {
  double mean = 0.0;
  double ci95_low = 0.0;
  double ci95_high = 0.0;
};

struct PceMoments {
  MomentEstimate mean;  // surrogate mean = c0 per draw
  MomentEstimate sd;    // surrogate SD = sqrt(sum_{i>=1} c_i^2) per draw
};

inline PceMoments pce_moments(const PosteriorDraws& draws) {
  if (draws.coef_cols.empty()) throw ShapeError("pce_moments: draws carry no coefficients");
  const long s_total = draws.n_draws();
  if (s_total == 0) throw ShapeError("pce_moments: empty draws");
  Eigen::VectorXd mean_draws(s_total), sd_draws(s_total);
  for (long s = 0; s < s_total; ++s) {
    mean_draws[s] = draws.draws(s, draws.coef_cols[0]);
    double acc = 0.0;
    for (std::size_t i = 1; i < draws.coef_cols.size(); ++i) {
      const double c = draws.draws(s, draws.coef_cols[i]);
      acc += c * c;
    }
    sd_draws[s] = std::sqrt(acc);
  }
  PceMoments out;
  out.mean = {mean_draws.mean(), empirical_quantile(mean_draws, 0.025),
              empirical_quantile(mean_draws, 0.975)};
  out.sd = {sd_draws.mean(), empirical_quantile(sd_draws, 0.025),
            empirical_quantile(sd_draws, 0.975)};
  return out;
}

// Predictive means per (draw, test point); optionally noise-inclusive.
struct PredictiveSample {
  Eigen::MatrixXd mu;  // S x T_test
  bool noise_included = false;
};

inline PredictiveSample predict(const PosteriorDraws& draws, const MultiIndexBasis& basis,
                                const Eigen::MatrixXd& test_inputs, bool include_noise = false,
                                std::uint64_t noise_seed = 0) {
  if (draws.coef_cols.empty()) throw ShapeError("predict: draws carry no coefficients");
  if (test_inputs.cols() != basis.input_dim())
    throw ShapeError("predict: test input dimension mismatch");
  for (int lbl : draws.coef_labels)
    if (lbl < 0 || lbl >= basis.size())
      throw ShapeError("predict: draw labels do not match the basis");

  const long t_test = test_inputs.rows();
  const int n_coef = static_cast<int>(draws.coef_cols.size());
  Eigen::MatrixXd psi_sel(t_test, n_coef);
  {
    Eigen::VectorXd row;
    Eigen::MatrixXd uni(basis.input_dim(), basis.degree() + 1);
    for (long r = 0; r < t_test; ++r) {
      for (int j = 0; j < basis.input_dim(); ++j) {
        const auto& set = basis.univariate(j);
        Eigen::VectorXd vals;
        set.evaluate_all_standard(set.standardization.to_standard(test_inputs(r, j)), vals);
        uni.row(j).head(basis.degree() + 1) = vals.transpose();
      }
      for (int i = 0; i < n_coef; ++i) {
        const auto& alpha = basis.multi_indices()[draws.coef_labels[i]];
        double prod = 1.0;
        for (int j = 0; j < basis.input_dim(); ++j)
          if (alpha[j] > 0) prod *= uni(j, alpha[j]);
        psi_sel(r, i) = prod;
      }
    }
  }

  Eigen::MatrixXd coef(draws.n_draws(), n_coef);
  for (int i = 0; i < n_coef; ++i) coef.col(i) = draws.draws.col(draws.coef_cols[i]);

  PredictiveSample out;
  out.mu = coef * psi_sel.transpose();
  if (include_noise) {
    if (draws.sigma_col < 0) throw ShapeError("predict: draws carry no sigma column");
    out.noise_included = true;
    CounterRng rng(noise_seed, 0x9d5f);
    for (long s = 0; s < out.mu.rows(); ++s) {
      const double sigma = draws.draws(s, draws.sigma_col);
      for (long r = 0; r < out.mu.cols(); ++r) out.mu(s, r) += sigma * rng.normal();
    }
  }
  return out;
}

// Out-of-sample RMSE: average over draws of the per-draw RMSE.
inline double rmse(const PredictiveSample& predictive, const Eigen::VectorXd& y_test) {
  if (y_test.size() == 0) throw ShapeError("rmse: empty test set");
  if (predictive.mu.cols() != y_test.size())
    throw ShapeError("rmse: prediction/test size mismatch");
  const long s_total = predictive.mu.rows();
  double acc = 0.0;
  for (long s = 0; s < s_total; ++s) {
    const double mse =
        (predictive.mu.row(s).transpose() - y_test).squaredNorm() / y_test.size();
    acc += std::sqrt(mse);
  }
  return acc / static_cast<double>(s_total);
}

// Normalized l2 norms over locations: ||v||_2 / L for the mean-bias and
// SD-bias vectors.
inline std::pair<double, double> location_norms(const Eigen::VectorXd& mean_err,
                                                const Eigen::VectorXd& sd_err) {
  if (mean_err.size() < 1 || sd_err.size() < 1)
    throw ShapeError("location_norms: empty input");
  return {mean_err.norm() / mean_err.size(), sd_err.norm() / sd_err.size()};
}

}  // namespace bpce
