#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <utility>
#include <vector>

#include "bpce/diagnostics.hpp"
#include "bpce/model.hpp"
#include "bpce/sampler.hpp"

namespace bpce {

struct FitResult {
  PosteriorDraws draws;
  Diagnostics diagnostics;
  double seconds = 0.0;
};

namespace detail {

inline void attach_pce_metadata(PosteriorDraws& draws, const LogDensityModel& model) {
  const int m = model.n_basis();
  draws.coef_cols.resize(m);
  draws.coef_labels = model.labels();
  for (int i = 0; i < m; ++i) draws.coef_cols[i] = i;
  draws.sigma_col = m;
  draws.r2_col = model.mode() == PriorMode::R2D2 ? m + 1 : -1;
}

}  // namespace detail

inline FitResult fit_model(const LogDensityModel& model, const SamplerConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  FitResult result;
  result.draws = sample(model, cfg);
  detail::attach_pce_metadata(result.draws, model);
  result.diagnostics = compute_diagnostics(result.draws);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

inline FitResult fit_r2d2(const Eigen::MatrixXd& psi, const Eigen::VectorXd& y,
                          const R2D2Config& prior, const SamplerConfig& cfg,
                          std::vector<int> labels = {}) {
  return fit_model(LogDensityModel::r2d2(psi, y, prior, std::move(labels)), cfg);
}

inline FitResult fit_flat(const Eigen::MatrixXd& psi, const Eigen::VectorXd& y,
                          const FlatPriorConfig& prior, const SamplerConfig& cfg,
                          std::vector<int> labels = {}) {
  return fit_model(LogDensityModel::flat(psi, y, prior, std::move(labels)), cfg);
}

}  // namespace bpce
