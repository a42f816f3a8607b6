#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bpce/basis.hpp"
#include "bpce/bench.hpp"
#include "bpce/posterior.hpp"
#include "bpce/rng.hpp"

using namespace bpce;

namespace {

// Minimal draw container over M coefficients (no sampler involved).
PosteriorDraws coefficient_draws(const Eigen::MatrixXd& coef_rows) {
  PosteriorDraws draws;
  const int m = static_cast<int>(coef_rows.cols());
  draws.draws = coef_rows;
  draws.n_chains = 1;
  draws.n_warmup = 0;
  draws.n_iterations = static_cast<int>(coef_rows.rows());
  draws.chain = Eigen::VectorXi::Zero(coef_rows.rows());
  draws.iteration = Eigen::VectorXi::LinSpaced(coef_rows.rows(), 0, coef_rows.rows() - 1);
  draws.divergent.assign(coef_rows.rows(), 0);
  for (int i = 0; i < m; ++i) {
    draws.names.push_back("c" + std::to_string(i));
    draws.coef_cols.push_back(i);
    draws.coef_labels.push_back(i);
  }
  return draws;
}

}  // namespace

TEST_CASE("sobol indices") {
  SECTION("constant coefficient draws (., 3, 4) give S = (0.36, 0.64)") {
    Eigen::MatrixXd coef(5, 3);
    for (int s = 0; s < 5; ++s) coef.row(s) << 7.0, 3.0, 4.0;
    const SobolReport report = sobol_indices(coefficient_draws(coef));
    CHECK(report.mean[0] == Catch::Approx(0.36));
    CHECK(report.mean[1] == Catch::Approx(0.64));
    CHECK(report.ranking[0] == 1);  // larger index first
    CHECK(report.cumulative[1] == Catch::Approx(1.0));
  }
  SECTION("single nonzero coefficient takes the whole index") {
    Eigen::MatrixXd coef(3, 4);
    coef.setZero();
    coef.col(2).setConstant(-2.5);
    const SobolReport report = sobol_indices(coefficient_draws(coef));
    CHECK(report.mean[1] == Catch::Approx(1.0));
    CHECK(report.mean[0] == Catch::Approx(0.0).margin(1e-15));
    CHECK(report.mean[2] == Catch::Approx(0.0).margin(1e-15));
  }
  SECTION("all-zero draws are excluded with a count") {
    Eigen::MatrixXd coef(4, 3);
    coef.setZero();
    coef(0, 1) = 1.0;
    coef(2, 2) = 2.0;
    const SobolReport report = sobol_indices(coefficient_draws(coef));
    CHECK(report.excluded_draws == 2);
    CHECK(report.mean[0] == Catch::Approx(0.5));
    CHECK(report.mean[1] == Catch::Approx(0.5));
  }
  SECTION("per-draw indices sum to one") {
    CounterRng rng(3);
    Eigen::MatrixXd coef(200, 6);
    for (long s = 0; s < coef.rows(); ++s)
      for (int i = 0; i < 6; ++i) coef(s, i) = rng.normal();
    const SobolReport report = sobol_indices(coefficient_draws(coef));
    CHECK(report.mean.sum() == Catch::Approx(1.0).margin(1e-12));
    CHECK(report.cumulative[4] == Catch::Approx(1.0).margin(1e-12));
    for (int r = 1; r < 5; ++r) CHECK(report.cumulative[r] >= report.cumulative[r - 1]);
  }
}

TEST_CASE("pce moments") {
  SECTION("constant surrogate") {
    Eigen::MatrixXd coef(6, 4);
    coef.setZero();
    coef.col(0).setConstant(2.0);
    const PceMoments moments = pce_moments(coefficient_draws(coef));
    CHECK(moments.mean.mean == Catch::Approx(2.0));
    CHECK(moments.sd.mean == Catch::Approx(0.0).margin(1e-15));
  }
  SECTION("sd is invariant to coefficient sign flips") {
    CounterRng rng(5);
    Eigen::MatrixXd coef(50, 5);
    for (long s = 0; s < coef.rows(); ++s)
      for (int i = 0; i < 5; ++i) coef(s, i) = rng.normal();
    Eigen::MatrixXd flipped = coef;
    flipped.col(3) *= -1.0;
    const PceMoments a = pce_moments(coefficient_draws(coef));
    const PceMoments b = pce_moments(coefficient_draws(flipped));
    CHECK(a.sd.mean == Catch::Approx(b.sd.mean).margin(1e-14));
  }
}

TEST_CASE("ishigami analytic truth cross-checked by Monte Carlo") {
  const BenchmarkProblem problem = make_ishigami();
  CHECK(problem.true_mean == Catch::Approx(3.5));
  const double pi4 = std::pow(3.14159265358979323846, 4);
  const double variance = 49.0 / 8.0 + 0.1 * pi4 / 5.0 + 0.01 * pi4 * pi4 / 18.0 + 0.5;
  CHECK(variance == Catch::Approx(13.8446).margin(5e-4));
  CHECK(problem.true_sd == Catch::Approx(std::sqrt(variance)));
  CHECK(problem.true_sd == Catch::Approx(3.7208).margin(5e-4));

  CounterRng rng(123);
  const long n = 10000000;
  double sum = 0.0, sum_sq = 0.0;
  for (long i = 0; i < n; ++i) {
    Eigen::VectorXd w(3);
    for (int j = 0; j < 3; ++j)
      w[j] = rng.uniform(problem.bounds[j].first, problem.bounds[j].second);
    const double value = problem.evaluator(w);
    sum += value;
    sum_sq += value * value;
  }
  const double mc_mean = sum / n;
  const double mc_sd = std::sqrt(sum_sq / n - mc_mean * mc_mean);
  CHECK(mc_mean == Catch::Approx(problem.true_mean).margin(0.01));
  CHECK(mc_sd == Catch::Approx(problem.true_sd).margin(0.01));
}

TEST_CASE("sobol-g analytic truth cross-checked by Monte Carlo") {
  const BenchmarkProblem problem = make_sobol_g(default_sobol_g_coefficients());
  CHECK(problem.true_mean == 1.0);
  double var = 1.0;
  const Eigen::VectorXd a = default_sobol_g_coefficients();
  for (int j = 0; j < a.size(); ++j) var *= 1.0 + 1.0 / (3.0 * (1 + a[j]) * (1 + a[j]));
  CHECK(problem.true_sd == Catch::Approx(std::sqrt(var - 1.0)));

  CounterRng rng(321);
  const long n = 2000000;
  double sum = 0.0, sum_sq = 0.0;
  for (long i = 0; i < n; ++i) {
    Eigen::VectorXd w(8);
    for (int j = 0; j < 8; ++j) w[j] = rng.uniform01();
    const double value = problem.evaluator(w);
    sum += value;
    sum_sq += value * value;
  }
  CHECK(sum / n == Catch::Approx(1.0).margin(0.005));
  CHECK(std::sqrt(sum_sq / n - (sum / n) * (sum / n)) ==
        Catch::Approx(problem.true_sd).margin(0.01));
}

TEST_CASE("predict") {
  const BasisPtr basis =
      make_basis({moments_uniform(-1.0, 1.0, 2, 0), moments_uniform(-1.0, 1.0, 2, 1)}, 2);
  const int m = basis->size();

  SECTION("constant-only draws predict c0 everywhere") {
    Eigen::MatrixXd coef(4, m);
    coef.setZero();
    coef.col(0).setConstant(3.25);
    CounterRng rng(7);
    Eigen::MatrixXd x(10, 2);
    for (int r = 0; r < 10; ++r)
      for (int j = 0; j < 2; ++j) x(r, j) = rng.uniform(-1.0, 1.0);
    const PredictiveSample pred = predict(coefficient_draws(coef), *basis, x);
    CHECK((pred.mu.array() - 3.25).abs().maxCoeff() < 1e-14);
  }
  SECTION("prediction is linear in the coefficient draws") {
    CounterRng rng(9);
    Eigen::MatrixXd coef(5, m);
    for (long s = 0; s < 5; ++s)
      for (int i = 0; i < m; ++i) coef(s, i) = rng.normal();
    Eigen::MatrixXd x(6, 2);
    for (int r = 0; r < 6; ++r)
      for (int j = 0; j < 2; ++j) x(r, j) = rng.uniform(-1.0, 1.0);
    const PredictiveSample base = predict(coefficient_draws(coef), *basis, x);
    const PredictiveSample scaled = predict(coefficient_draws(3.0 * coef), *basis, x);
    CHECK((scaled.mu - 3.0 * base.mu).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("noise-inclusive draws add sigma-scaled noise") {
    Eigen::MatrixXd rows(2000, m + 1);
    rows.setZero();
    rows.col(m).setConstant(0.7);  // sigma column
    PosteriorDraws draws = coefficient_draws(rows.leftCols(m));
    draws.draws = rows;
    draws.names.push_back("sigma");
    draws.sigma_col = m;
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, 2);
    const PredictiveSample pred = predict(draws, *basis, x, true, 42);
    const double sd = sd_of(pred.mu.col(0));
    CHECK(sd == Catch::Approx(0.7).epsilon(0.05));
  }
  SECTION("dimension mismatch is rejected") {
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(2, m);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 3);
    CHECK_THROWS_AS(predict(coefficient_draws(coef), *basis, x), ShapeError);
  }
}

TEST_CASE("rmse follows the average-over-draws definition") {
  SECTION("perfect single-draw prediction") {
    PredictiveSample pred;
    pred.mu = Eigen::MatrixXd::Zero(1, 3);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(3);
    CHECK(rmse(pred, y) == 0.0);
  }
  SECTION("single draw with errors (3, 4)") {
    PredictiveSample pred;
    pred.mu = Eigen::MatrixXd::Zero(1, 2);
    Eigen::VectorXd y(2);
    y << 3.0, 4.0;
    CHECK(rmse(pred, y) == Catch::Approx(std::sqrt(25.0 / 2.0)));
  }
  SECTION("per-draw RMSEs of 1 and 3 average to 2") {
    PredictiveSample pred;
    pred.mu.resize(2, 2);
    pred.mu.row(0) << 1.0, 1.0;   // RMSE 1 against zero responses
    pred.mu.row(1) << 3.0, -3.0;  // RMSE 3
    Eigen::VectorXd y = Eigen::VectorXd::Zero(2);
    CHECK(rmse(pred, y) == Catch::Approx(2.0));
  }
  SECTION("empty test set is rejected") {
    PredictiveSample pred;
    pred.mu = Eigen::MatrixXd::Zero(1, 0);
    Eigen::VectorXd y;
    CHECK_THROWS_AS(rmse(pred, y), ShapeError);
  }
}

TEST_CASE("location norms") {
  SECTION("zero vectors") {
    const auto [m, s] = location_norms(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4));
    CHECK(m == 0.0);
    CHECK(s == 0.0);
  }
  SECTION("L = 2 with mean errors (3, 4)") {
    Eigen::VectorXd mean_err(2);
    mean_err << 3.0, 4.0;
    Eigen::VectorXd sd_err(2);
    sd_err << 0.0, 0.0;
    const auto [m, s] = location_norms(mean_err, sd_err);
    CHECK(m == Catch::Approx(2.5));
    CHECK(s == 0.0);
  }
  SECTION("L = 1 reduces to the absolute value") {
    Eigen::VectorXd v(1);
    v << -7.0;
    const auto [m, s] = location_norms(v, v);
    CHECK(m == Catch::Approx(7.0));
  }
}
