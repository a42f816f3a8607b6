#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bpce/basis.hpp"
#include "bpce/detsolve.hpp"
#include "bpce/errors.hpp"
#include "bpce/fit.hpp"
#include "bpce/posterior.hpp"
#include "bpce/rng.hpp"
#include "bpce/select.hpp"

namespace bpce {

// ---------------------------------------------------------------------------
// Benchmark target functions
// ---------------------------------------------------------------------------

inline double ishigami(const Eigen::Vector3d& omega, double a = 7.0, double b = 0.1) {
  const double s1 = std::sin(omega[0]);
  const double s2 = std::sin(omega[1]);
  return s1 + a * s2 * s2 + b * std::pow(omega[2], 4) * s1;
}

inline double sobol_g(const Eigen::VectorXd& omega, const Eigen::VectorXd& a) {
  if (omega.size() != a.size()) throw ShapeError("sobol_g: dimension mismatch");
  double prod = 1.0;
  for (int j = 0; j < omega.size(); ++j) {
    if (omega[j] < 0.0 || omega[j] > 1.0)
      throw ConfigError("sobol_g: inputs must lie in [0,1]");
    prod *= (std::abs(4.0 * omega[j] - 2.0) + a[j]) / (1.0 + a[j]);
  }
  return prod;
}

inline double signum(double omega) { return omega > 0.0 ? 1.0 : (omega < 0.0 ? -1.0 : 0.0); }

// A benchmark target: evaluator over a product-uniform box, with the analytic
// response moments when they are known.
struct BenchmarkProblem {
  std::string name;
  int input_dim = 0;
  std::vector<std::pair<double, double>> bounds;            // per-dimension uniform box
  std::function<double(const Eigen::VectorXd&)> evaluator;  // null for pure tabular data
  bool has_truth = false;
  double true_mean = 0.0;
  double true_sd = 0.0;
};

inline BenchmarkProblem make_ishigami(double a = 7.0, double b = 0.1) {
  BenchmarkProblem p;
  p.name = "ishigami";
  p.input_dim = 3;
  const double pi = 3.14159265358979323846;
  p.bounds.assign(3, {-pi, pi});
  p.evaluator = [a, b](const Eigen::VectorXd& w) {
    return ishigami(Eigen::Vector3d(w[0], w[1], w[2]), a, b);
  };
  p.has_truth = true;
  p.true_mean = a / 2.0;
  const double pi4 = pi * pi * pi * pi;
  p.true_sd = std::sqrt(a * a / 8.0 + b * pi4 / 5.0 + b * b * pi4 * pi4 / 18.0 + 0.5);
  return p;
}

inline BenchmarkProblem make_sobol_g(const Eigen::VectorXd& a) {
  BenchmarkProblem p;
  p.name = "sobol-g";
  p.input_dim = static_cast<int>(a.size());
  p.bounds.assign(p.input_dim, {0.0, 1.0});
  p.evaluator = [a](const Eigen::VectorXd& w) { return sobol_g(w, a); };
  p.has_truth = true;
  p.true_mean = 1.0;
  double var = 1.0;
  for (int j = 0; j < a.size(); ++j)
    var *= 1.0 + 1.0 / (3.0 * (1.0 + a[j]) * (1.0 + a[j]));
  p.true_sd = std::sqrt(var - 1.0);
  return p;
}

inline Eigen::VectorXd default_sobol_g_coefficients() {
  Eigen::VectorXd a(8);
  a << 1, 2, 5, 10, 20, 50, 100, 500;
  return a;
}

inline BenchmarkProblem make_signum() {
  BenchmarkProblem p;
  p.name = "signum";
  p.input_dim = 1;
  p.bounds.assign(1, {-1.0, 1.0});
  p.evaluator = [](const Eigen::VectorXd& w) { return signum(w[0]); };
  p.has_truth = true;
  p.true_mean = 0.0;
  p.true_sd = 1.0;
  return p;
}

inline BenchmarkProblem make_tabular(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& y) {
  if (inputs.rows() != y.size()) throw ShapeError("make_tabular: input/response mismatch");
  BenchmarkProblem p;
  p.name = "tabular";
  p.input_dim = static_cast<int>(inputs.cols());
  for (int j = 0; j < inputs.cols(); ++j)
    p.bounds.emplace_back(inputs.col(j).minCoeff(), inputs.col(j).maxCoeff());
  p.evaluator = nullptr;
  p.has_truth = false;
  return p;
}

// ---------------------------------------------------------------------------
// Training designs
// ---------------------------------------------------------------------------

namespace detail {

// Joe-Kuo direction-number parameters for Sobol dimensions 2..8 (dimension 1
// is the van der Corput sequence in base 2).
struct SobolDirection {
  int s;
  std::uint32_t a;
  std::uint32_t m[5];
};

inline constexpr SobolDirection kJoeKuo[] = {
    {1, 0, {1, 0, 0, 0, 0}},   // dim 2
    {2, 1, {1, 3, 0, 0, 0}},   // dim 3
    {3, 1, {1, 3, 1, 0, 0}},   // dim 4
    {3, 2, {1, 1, 1, 0, 0}},   // dim 5
    {4, 1, {1, 1, 3, 3, 0}},   // dim 6
    {4, 4, {1, 3, 5, 13, 0}},  // dim 7
    {5, 2, {1, 1, 5, 5, 17}},  // dim 8
};

constexpr int kSobolBits = 32;

inline std::vector<std::uint32_t> sobol_direction_vectors(int dim_index) {
  std::vector<std::uint32_t> v(kSobolBits + 1, 0);
  if (dim_index == 0) {
    for (int k = 1; k <= kSobolBits; ++k) v[k] = 1u << (kSobolBits - k);
    return v;
  }
  const SobolDirection& dir = kJoeKuo[dim_index - 1];
  std::vector<std::uint64_t> m(kSobolBits + 1, 0);
  for (int k = 1; k <= dir.s; ++k) m[k] = dir.m[k - 1];
  for (int k = dir.s + 1; k <= kSobolBits; ++k) {
    std::uint64_t val = m[k - dir.s] ^ (m[k - dir.s] << dir.s);
    for (int i = 1; i < dir.s; ++i)
      if ((dir.a >> (dir.s - 1 - i)) & 1u) val ^= m[k - i] << i;
    m[k] = val;
  }
  for (int k = 1; k <= kSobolBits; ++k)
    v[k] = static_cast<std::uint32_t>(m[k] << (kSobolBits - k));
  return v;
}

}  // namespace detail

// First T points of the digital Sobol sequence in [0,1)^N, Gray-code order.
// The all-zeros point at index 0 is skipped: emission starts at index
// 1 + skip.
inline Eigen::MatrixXd sobol_sequence(int n_dim, long t, long skip = 0) {
  if (n_dim < 1 || n_dim > 8)
    throw ConfigError("sobol_sequence: supported dimensions are 1..8");
  if (t < 0 || skip < 0) throw ConfigError("sobol_sequence: T and skip must be >= 0");

  std::vector<std::vector<std::uint32_t>> v(n_dim);
  for (int j = 0; j < n_dim; ++j) v[j] = detail::sobol_direction_vectors(j);

  Eigen::MatrixXd points(t, n_dim);
  std::vector<std::uint32_t> x(n_dim, 0);
  const double scale = std::pow(2.0, -detail::kSobolBits);
  long row = 0;
  for (long n = 1; row < t; ++n) {
    // Gray-code step: flip the direction of the lowest zero bit of n-1.
    unsigned c = 1;
    for (std::uint64_t bits = static_cast<std::uint64_t>(n - 1); bits & 1ull; bits >>= 1) ++c;
    for (int j = 0; j < n_dim; ++j) x[j] ^= v[j][c];
    if (n >= 1 + skip) {
      for (int j = 0; j < n_dim; ++j) points(row, j) = x[j] * scale;
      ++row;
    }
  }
  return points;
}

// Training-point design specification.
struct DesignSpec {
  enum class Kind { SobolSequence, GaussQuadratureGrid, EquidistantGrid, File };
  Kind kind = Kind::SobolSequence;
  long t = 0;
  std::uint64_t seed = 0;  // reserved for pseudo-random variants
  long skip = 0;
  std::string file;  // Kind::File
};

namespace detail {

inline long grid_side(long t, int n_dim) {
  const double side = std::pow(static_cast<double>(t), 1.0 / n_dim);
  const long k = std::lround(side);
  long check = 1;
  for (int j = 0; j < n_dim; ++j) check *= k;
  if (check != t)
    throw ConfigError("grid design requires T to be a perfect N-th power");
  return k;
}

inline Eigen::MatrixXd tensor_grid(const std::vector<Eigen::VectorXd>& nodes_per_dim) {
  const int n_dim = static_cast<int>(nodes_per_dim.size());
  long total = 1;
  for (const auto& nodes : nodes_per_dim) total *= nodes.size();
  Eigen::MatrixXd grid(total, n_dim);
  std::vector<long> idx(n_dim, 0);
  for (long row = 0; row < total; ++row) {
    for (int j = 0; j < n_dim; ++j) grid(row, j) = nodes_per_dim[j][idx[j]];
    for (int j = n_dim - 1; j >= 0; --j) {
      if (++idx[j] < nodes_per_dim[j].size()) break;
      idx[j] = 0;
    }
  }
  return grid;
}

}  // namespace detail

// Raw-domain training inputs for a problem.
inline Eigen::MatrixXd make_design(const BenchmarkProblem& problem, const DesignSpec& spec) {
  const int n_dim = problem.input_dim;
  switch (spec.kind) {
    case DesignSpec::Kind::SobolSequence: {
      Eigen::MatrixXd unit = sobol_sequence(n_dim, spec.t, spec.skip);
      for (int j = 0; j < n_dim; ++j) {
        const auto [lo, hi] = problem.bounds[j];
        unit.col(j) = lo + (hi - lo) * unit.col(j).array();
      }
      return unit;
    }
    case DesignSpec::Kind::GaussQuadratureGrid: {
      const long side = detail::grid_side(spec.t, n_dim);
      std::vector<Eigen::VectorXd> nodes(n_dim);
      for (int j = 0; j < n_dim; ++j) {
        const auto [lo, hi] = problem.bounds[j];
        const MomentSequence mom = moments_uniform(lo, hi, static_cast<int>(side), j);
        const std::vector<double> raw = gauss_nodes(mom, static_cast<int>(side));
        nodes[j] = Eigen::Map<const Eigen::VectorXd>(raw.data(), raw.size());
      }
      return detail::tensor_grid(nodes);
    }
    case DesignSpec::Kind::EquidistantGrid: {
      const long side = detail::grid_side(spec.t, n_dim);
      std::vector<Eigen::VectorXd> nodes(n_dim);
      for (int j = 0; j < n_dim; ++j) {
        const auto [lo, hi] = problem.bounds[j];
        if (side == 1)
          nodes[j] = Eigen::VectorXd::Constant(1, 0.5 * (lo + hi));
        else
          nodes[j] = Eigen::VectorXd::LinSpaced(side, lo, hi);
      }
      return detail::tensor_grid(nodes);
    }
    case DesignSpec::Kind::File:
      throw ConfigError("make_design: file designs are loaded by the caller");
  }
  throw ConfigError("make_design: unknown design kind");
}

// Reproducible i.i.d. normal noise.
inline Eigen::VectorXd add_noise(const Eigen::VectorXd& y, double noise_sd, std::uint64_t seed) {
  if (!(noise_sd >= 0.0)) throw ConfigError("add_noise: noise_sd must be >= 0");
  if (noise_sd == 0.0) return y;
  CounterRng rng(seed, 0xadd0);
  Eigen::VectorXd out = y;
  for (long i = 0; i < out.size(); ++i) out[i] += noise_sd * rng.normal();
  return out;
}

// ---------------------------------------------------------------------------
// Experiment orchestration
// ---------------------------------------------------------------------------

struct PriorSpec {
  PriorMode mode = PriorMode::R2D2;
  double zeta = 0.5;
  double nu = 2.0;
  double theta_scalar = 1.0;
  std::optional<double> sigma_scale;  // empty = data-driven default
};

struct SelectionSpec {
  int m_sel = 25;
  bool run_sobol = true;
  bool run_projpred = true;
};

struct MetricRow {
  std::string model;  // reference | sobol-greedy | projpred | classical-* | bayesian-*
  long t = 0;
  int m = 0;
  double mean_bias = std::numeric_limits<double>::quiet_NaN();
  double sd_bias = std::numeric_limits<double>::quiet_NaN();
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double fit_seconds = 0.0;
  double rhat_max = std::numeric_limits<double>::quiet_NaN();
  int divergences = 0;
};

struct ExperimentReport {
  std::string problem;
  long t = 0;
  int m = 0;
  int degree = 0;
  std::string design;
  double noise_sd = 0.0;
  std::uint64_t noise_seed = 0;
  bool flagged = false;  // any reference/refit R-hat above 1.01
  std::vector<MetricRow> rows;
  std::vector<int> projpred_selection;
  std::vector<int> sobol_selection;
  long t_test = 0;
  std::uint64_t test_seed = 0;
  long sobol_start_index = 1;  // all-zeros point skipped by convention
};

struct ExperimentConfig {
  int degree = 10;
  PriorSpec prior;
  SamplerConfig sampler;
  SelectionSpec selection;
  long t_test = 500;
  std::uint64_t test_seed = 0;  // 0 = derived from the sampler seed
  double noise_sd = 0.0;
  std::uint64_t noise_seed = 0;
};

namespace detail {

inline std::vector<MomentSequence> problem_moments(const BenchmarkProblem& problem, int degree,
                                                   const Eigen::MatrixXd& train_inputs) {
  std::vector<MomentSequence> moments;
  moments.reserve(problem.input_dim);
  for (int j = 0; j < problem.input_dim; ++j) {
    if (problem.evaluator) {
      const auto [lo, hi] = problem.bounds[j];
      moments.push_back(moments_uniform(lo, hi, degree, j));
    } else {
      const Eigen::VectorXd col = train_inputs.col(j);
      moments.push_back(
          moments_from_samples(std::span<const double>(col.data(), col.size()), degree, j));
    }
  }
  return moments;
}

inline Eigen::MatrixXd fresh_test_points(const BenchmarkProblem& problem, long t_test,
                                         std::uint64_t seed) {
  CounterRng rng(seed, 0x7e57);
  Eigen::MatrixXd pts(t_test, problem.input_dim);
  for (long r = 0; r < t_test; ++r)
    for (int j = 0; j < problem.input_dim; ++j) {
      const auto [lo, hi] = problem.bounds[j];
      pts(r, j) = rng.uniform(lo, hi);
    }
  return pts;
}

inline Eigen::VectorXd evaluate_problem(const BenchmarkProblem& problem,
                                        const Eigen::MatrixXd& inputs) {
  Eigen::VectorXd y(inputs.rows());
  for (long r = 0; r < inputs.rows(); ++r) y[r] = problem.evaluator(inputs.row(r).transpose());
  return y;
}

inline MetricRow bayesian_metrics(const std::string& model_name, const FitResult& fit,
                                  const BenchmarkProblem& problem, const MultiIndexBasis& basis,
                                  const Eigen::MatrixXd& test_inputs,
                                  const Eigen::VectorXd& y_test) {
  MetricRow row;
  row.model = model_name;
  row.fit_seconds = fit.seconds;
  row.rhat_max = fit.diagnostics.max_rhat;
  row.divergences = fit.diagnostics.divergences;
  if (problem.has_truth) {
    const PceMoments moments = pce_moments(fit.draws);
    row.mean_bias = moments.mean.mean - problem.true_mean;
    row.sd_bias = moments.sd.mean - problem.true_sd;
  }
  if (y_test.size() > 0) {
    const PredictiveSample pred = predict(fit.draws, basis, test_inputs);
    row.rmse = rmse(pred, y_test);
  }
  return row;
}

}  // namespace detail

// Full single-cell pipeline: basis -> reference fit -> diagnostics gate ->
// both selections -> refits -> metrics on fresh test points.
inline ExperimentReport run_experiment(const BenchmarkProblem& problem, const DesignSpec& design,
                                       const ExperimentConfig& cfg,
                                       const TrainingSet* tabular_data = nullptr) {
  ExperimentReport report;
  report.problem = problem.name;
  report.degree = cfg.degree;
  report.noise_sd = cfg.noise_sd;
  report.noise_seed = cfg.noise_seed;
  report.t_test = cfg.t_test;
  report.test_seed = cfg.test_seed != 0 ? cfg.test_seed : (cfg.sampler.seed ^ 0x7e57c0de);

  // Training data.
  Eigen::MatrixXd train_inputs;
  Eigen::VectorXd y;
  if (tabular_data) {
    train_inputs = tabular_data->inputs;
    y = tabular_data->y;
    report.design = "file";
  } else {
    train_inputs = make_design(problem, design);
    y = detail::evaluate_problem(problem, train_inputs);
    report.sobol_start_index = 1 + design.skip;
    switch (design.kind) {
      case DesignSpec::Kind::SobolSequence: report.design = "sobol-sequence"; break;
      case DesignSpec::Kind::GaussQuadratureGrid: report.design = "gauss-quadrature-grid"; break;
      case DesignSpec::Kind::EquidistantGrid: report.design = "equidistant-grid"; break;
      case DesignSpec::Kind::File: report.design = "file"; break;
    }
  }
  if (cfg.noise_sd > 0.0) y = add_noise(y, cfg.noise_sd, cfg.noise_seed);
  report.t = train_inputs.rows();

  // Basis and design matrix.
  const BasisPtr basis = make_basis(detail::problem_moments(problem, cfg.degree, train_inputs),
                                    cfg.degree);
  report.m = basis->size();
  const DesignMatrix dm = evaluate_design(basis, train_inputs);

  // Fresh test set.
  Eigen::MatrixXd test_inputs;
  Eigen::VectorXd y_test;
  if (problem.evaluator) {
    test_inputs = detail::fresh_test_points(problem, cfg.t_test, report.test_seed);
    y_test = detail::evaluate_problem(problem, test_inputs);
  }

  // Reference fit.
  FitResult reference;
  R2D2Config r2d2_prior;
  if (cfg.prior.mode == PriorMode::R2D2) {
    r2d2_prior = default_r2d2_config(y, cfg.prior.zeta, cfg.prior.nu);
    r2d2_prior.theta = Eigen::VectorXd::Constant(basis->size() - 1, cfg.prior.theta_scalar);
    if (cfg.prior.sigma_scale) r2d2_prior.sigma_scale = *cfg.prior.sigma_scale;
    reference = fit_r2d2(dm.values, y, r2d2_prior, cfg.sampler);
  } else {
    FlatPriorConfig flat_prior = default_flat_config(y);
    if (cfg.prior.sigma_scale) flat_prior.sigma_scale = *cfg.prior.sigma_scale;
    reference = fit_flat(dm.values, y, flat_prior, cfg.sampler);
  }
  report.flagged = reference.diagnostics.max_rhat > 1.01;
  {
    MetricRow row = detail::bayesian_metrics("reference", reference, problem, *basis,
                                             test_inputs, y_test);
    row.t = report.t;
    row.m = report.m;
    report.rows.push_back(row);
  }

  // Selections and refits (R2D2 reference only; flat references skip them).
  if (cfg.prior.mode == PriorMode::R2D2 &&
      (cfg.selection.run_sobol || cfg.selection.run_projpred) &&
      cfg.selection.m_sel < basis->size()) {
    const SobolReport sobol_report = sobol_indices(reference.draws);
    const auto run_refit = [&](const SelectionResult& sel, const std::string& name,
                               std::vector<int>& store) {
      store = sel.indices;
      FitResult sparse = refit_sparse(sel, dm, y, r2d2_prior, cfg.sampler);
      report.flagged = report.flagged || sparse.diagnostics.max_rhat > 1.01;
      MetricRow row =
          detail::bayesian_metrics(name, sparse, problem, *basis, test_inputs, y_test);
      row.t = report.t;
      row.m = static_cast<int>(sel.indices.size());
      report.rows.push_back(row);
    };
    if (cfg.selection.run_sobol)
      run_refit(select_sobol(sobol_report, cfg.selection.m_sel), "sobol-greedy",
                report.sobol_selection);
    if (cfg.selection.run_projpred)
      run_refit(select_projpred(reference.draws, dm, cfg.selection.m_sel), "projpred",
                report.projpred_selection);
  }
  return report;
}

// Signum study cell: classical exact solve vs flat-prior vs R2D2 Bayesian
// models on T = M = d+1 training points (no variable selection).
inline ExperimentReport run_signum_cell(int degree, DesignSpec::Kind design_kind,
                                        const ExperimentConfig& cfg) {
  const BenchmarkProblem problem = make_signum();
  DesignSpec design;
  design.kind = design_kind;
  design.t = degree + 1;

  ExperimentReport report;
  report.problem = problem.name;
  report.degree = degree;
  report.t = degree + 1;
  report.design = design_kind == DesignSpec::Kind::GaussQuadratureGrid ? "gauss-quadrature-grid"
                                                                       : "sobol-sequence";
  report.t_test = cfg.t_test;
  report.test_seed = cfg.test_seed != 0 ? cfg.test_seed : (cfg.sampler.seed ^ 0x7e57c0de);

  const Eigen::MatrixXd train_inputs = make_design(problem, design);
  const Eigen::VectorXd y = detail::evaluate_problem(problem, train_inputs);
  const BasisPtr basis =
      make_basis(detail::problem_moments(problem, degree, train_inputs), degree);
  report.m = basis->size();
  const DesignMatrix dm = evaluate_design(basis, train_inputs);

  const Eigen::MatrixXd test_inputs =
      detail::fresh_test_points(problem, cfg.t_test, report.test_seed);
  const Eigen::VectorXd y_test = detail::evaluate_problem(problem, test_inputs);

  // Classical fully determined solve.
  {
    const auto start = std::chrono::steady_clock::now();
    const DeterministicFit fit = solve_exact(dm.values, y);
    MetricRow row;
    row.model = "classical-exact";
    row.t = report.t;
    row.m = report.m;
    row.fit_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    row.mean_bias = fit.coeffs[0] - problem.true_mean;
    row.sd_bias = std::sqrt(fit.coeffs.tail(report.m - 1).squaredNorm()) - problem.true_sd;
    Eigen::VectorXd pred(test_inputs.rows());
    const DesignMatrix psi_test = evaluate_design(basis, test_inputs);
    pred = psi_test.values * fit.coeffs;
    row.rmse = std::sqrt((pred - y_test).squaredNorm() / y_test.size());
    report.rows.push_back(row);
  }

  const auto bayes_row = [&](const std::string& name, const FitResult& fit) {
    MetricRow row =
        detail::bayesian_metrics(name, fit, problem, *basis, test_inputs, y_test);
    row.t = report.t;
    row.m = report.m;
    report.flagged = report.flagged || fit.diagnostics.max_rhat > 1.01;
    report.rows.push_back(row);
  };
  {
    FlatPriorConfig flat_prior = default_flat_config(y);
    if (cfg.prior.sigma_scale) flat_prior.sigma_scale = *cfg.prior.sigma_scale;
    bayes_row("bayesian-flat", fit_flat(dm.values, y, flat_prior, cfg.sampler));
  }
  {
    R2D2Config prior = default_r2d2_config(y, cfg.prior.zeta, cfg.prior.nu);
    prior.theta = Eigen::VectorXd::Constant(report.m - 1, cfg.prior.theta_scalar);
    if (cfg.prior.sigma_scale) prior.sigma_scale = *cfg.prior.sigma_scale;
    bayes_row("bayesian-r2d2", fit_r2d2(dm.values, y, prior, cfg.sampler));
  }
  return report;
}

}  // namespace bpce
