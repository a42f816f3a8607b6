#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bpce/basis.hpp"
#include "bpce/bench.hpp"
#include "bpce/detsolve.hpp"
#include "bpce/rng.hpp"

using namespace bpce;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, CounterRng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("solve_exact") {
  SECTION("identity system") {
    Eigen::MatrixXd psi = Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd y(3);
    y << 1, 2, 3;
    const DeterministicFit fit = solve_exact(psi, y);
    CHECK((fit.coeffs - y).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(fit.residual_norm < 1e-14);
  }
  SECTION("shape mismatch") {
    Eigen::MatrixXd psi = Eigen::MatrixXd::Random(5, 6);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(5);
    CHECK_THROWS_AS(solve_exact(psi, y), ShapeError);
  }
  SECTION("signum interpolation at Gaussian nodes, d = 10") {
    const BenchmarkProblem problem = make_signum();
    DesignSpec spec;
    spec.kind = DesignSpec::Kind::GaussQuadratureGrid;
    spec.t = 11;
    const Eigen::MatrixXd x = make_design(problem, spec);
    Eigen::VectorXd y(11);
    for (int i = 0; i < 11; ++i) y[i] = signum(x(i, 0));
    const BasisPtr basis = make_basis({moments_uniform(-1.0, 1.0, 10)}, 10);
    const DesignMatrix design = evaluate_design(basis, x);
    const DeterministicFit fit = solve_exact(design, y);
    CHECK((design.values * fit.coeffs - y).cwiseAbs().maxCoeff() < 1e-8);
  }
  SECTION("singular square system is rejected") {
    Eigen::MatrixXd psi = Eigen::MatrixXd::Ones(3, 3);
    Eigen::VectorXd y(3);
    y << 1, 2, 3;
    CHECK_THROWS_AS(solve_exact(psi, y), ShapeError);
  }
}

TEST_CASE("solve_least_squares") {
  CounterRng rng(11);
  SECTION("consistent overdetermined system has zero residual") {
    Eigen::MatrixXd psi = random_matrix(20, 5, rng);
    Eigen::VectorXd truth = random_matrix(5, 1, rng);
    Eigen::VectorXd y = psi * truth;
    const DeterministicFit fit = solve_least_squares(psi, y);
    CHECK(fit.residual_norm < 1e-10 * y.norm());
    CHECK((fit.coeffs - truth).norm() < 1e-10);
  }
  SECTION("response orthogonal to the column span gives c = 0") {
    Eigen::MatrixXd psi(4, 2);
    psi << 1, 0, 0, 1, 0, 0, 0, 0;
    Eigen::VectorXd y(4);
    y << 0, 0, 1, -2;
    const DeterministicFit fit = solve_least_squares(psi, y);
    CHECK(fit.coeffs.cwiseAbs().maxCoeff() < 1e-14);
  }
  SECTION("gradient optimality") {
    Eigen::MatrixXd psi = random_matrix(40, 7, rng);
    Eigen::VectorXd y = random_matrix(40, 1, rng);
    const DeterministicFit fit = solve_least_squares(psi, y);
    const Eigen::VectorXd grad = psi.transpose() * (y - psi * fit.coeffs);
    CHECK(grad.norm() <= 1e-8 * (psi.transpose() * y).norm());
  }
  SECTION("rank deficiency suggests ridge") {
    Eigen::MatrixXd psi(6, 3);
    psi.col(0) = Eigen::VectorXd::LinSpaced(6, -1.0, 1.0);
    psi.col(1) = 2.0 * psi.col(0);
    psi.col(2) = Eigen::VectorXd::Ones(6);
    Eigen::VectorXd y = Eigen::VectorXd::Ones(6);
    CHECK_THROWS_WITH(solve_least_squares(psi, y),
                      Catch::Matchers::ContainsSubstring("ridge"));
  }
  SECTION("ishigami d = 10 on 800 Sobol points: RMSE below 0.5") {
    const BenchmarkProblem problem = make_ishigami();
    DesignSpec spec;
    spec.kind = DesignSpec::Kind::SobolSequence;
    spec.t = 800;
    const Eigen::MatrixXd x = make_design(problem, spec);
    Eigen::VectorXd y(x.rows());
    for (long i = 0; i < x.rows(); ++i) y[i] = problem.evaluator(x.row(i).transpose());

    std::vector<MomentSequence> mom;
    for (int j = 0; j < 3; ++j)
      mom.push_back(moments_uniform(problem.bounds[j].first, problem.bounds[j].second, 10, j));
    const BasisPtr basis = make_basis(mom, 10);
    const DesignMatrix design = evaluate_design(basis, x);
    const DeterministicFit fit = solve_least_squares(design, y);

    // Cross-check the QR path against an SVD reference solver on the same data.
    const Eigen::VectorXd ref =
        design.values.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(y);
    CHECK((fit.coeffs - ref).norm() < 1e-8 * std::max(1.0, ref.norm()));

    CounterRng rng_test(99);
    Eigen::MatrixXd x_test(500, 3);
    for (int r = 0; r < 500; ++r)
      for (int j = 0; j < 3; ++j)
        x_test(r, j) = rng_test.uniform(problem.bounds[j].first, problem.bounds[j].second);
    Eigen::VectorXd y_test(500);
    for (int r = 0; r < 500; ++r) y_test[r] = problem.evaluator(x_test.row(r).transpose());
    const DesignMatrix test_design = evaluate_design(basis, x_test);
    const double rmse_value =
        std::sqrt((test_design.values * fit.coeffs - y_test).squaredNorm() / 500.0);
    CHECK(rmse_value < 0.5);
  }
}

TEST_CASE("solve_ridge") {
  CounterRng rng(13);
  SECTION("lambda = 1 on the identity halves the response") {
    Eigen::MatrixXd psi = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd y(2);
    y << 2, 4;
    const DeterministicFit fit = solve_ridge(psi, y, 1.0);
    CHECK(fit.coeffs[0] == Catch::Approx(1.0));
    CHECK(fit.coeffs[1] == Catch::Approx(2.0));
  }
  SECTION("infinite shrinkage sends coefficients to zero") {
    Eigen::MatrixXd psi = random_matrix(10, 4, rng);
    Eigen::VectorXd y = random_matrix(10, 1, rng);
    const DeterministicFit fit = solve_ridge(psi, y, 1e12);
    CHECK(fit.coeffs.cwiseAbs().maxCoeff() < 1e-8);
  }
  SECTION("underdetermined problems are solvable when lambda > 0") {
    Eigen::MatrixXd psi = random_matrix(5, 9, rng);
    Eigen::VectorXd y = random_matrix(5, 1, rng);
    const DeterministicFit fit = solve_ridge(psi, y, 0.5);
    CHECK(fit.coeffs.size() == 9);
    CHECK(fit.coeffs.allFinite());
  }
  SECTION("lambda = 0 with singular normal equations is rejected") {
    Eigen::MatrixXd psi(4, 2);
    psi.col(0) = Eigen::VectorXd::Ones(4);
    psi.col(1) = 2.0 * psi.col(0);
    Eigen::VectorXd y = Eigen::VectorXd::Ones(4);
    CHECK_THROWS_AS(solve_ridge(psi, y, 0.0), ShapeError);
  }
  SECTION("negative lambda is rejected") {
    Eigen::MatrixXd psi = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd y = Eigen::VectorXd::Ones(2);
    CHECK_THROWS_AS(solve_ridge(psi, y, -1.0), ShapeError);
  }
}

TEST_CASE("nesting of the three solvers") {
  CounterRng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 3 + static_cast<int>(rng.below(6));
    Eigen::MatrixXd psi = random_matrix(m, m, rng);
    psi.diagonal().array() += 3.0;  // keep the random square systems invertible
    Eigen::VectorXd y = random_matrix(m, 1, rng);

    const DeterministicFit exact = solve_exact(psi, y);
    const DeterministicFit ls = solve_least_squares(psi, y);
    const DeterministicFit ridge0 = solve_ridge(psi, y, 0.0);
    const double scale = std::max(1.0, exact.coeffs.norm());
    CHECK((exact.coeffs - ls.coeffs).norm() < 1e-10 * scale);
    CHECK((exact.coeffs - ridge0.coeffs).norm() < 1e-8 * scale);
  }
}

TEST_CASE("monotone shrinkage of the ridge path") {
  CounterRng rng(19);
  Eigen::MatrixXd psi = random_matrix(30, 8, rng);
  Eigen::VectorXd y = random_matrix(30, 1, rng);
  double previous = std::numeric_limits<double>::infinity();
  for (double lambda : {0.0, 0.01, 0.1, 1.0, 10.0, 100.0}) {
    const DeterministicFit fit = solve_ridge(psi, y, lambda);
    CHECK(fit.coeffs.norm() <= previous + 1e-12);
    previous = fit.coeffs.norm();
  }
}

TEST_CASE("ridge optimality condition") {
  CounterRng rng(23);
  Eigen::MatrixXd psi = random_matrix(25, 6, rng);
  Eigen::VectorXd y = random_matrix(25, 1, rng);
  const double lambda = 0.7;
  const DeterministicFit fit = solve_ridge(psi, y, lambda);
  Eigen::VectorXd stationarity =
      (psi.transpose() * psi * fit.coeffs + lambda * fit.coeffs - psi.transpose() * y);
  CHECK(stationarity.norm() < 1e-8 * (psi.transpose() * y).norm());
}
