#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bpce/diagnostics.hpp"
#include "bpce/fit.hpp"
#include "bpce/posterior.hpp"
#include "bpce/rng.hpp"
#include "bpce/select.hpp"

using namespace bpce;

namespace {

Eigen::MatrixXd orthonormal_design(int t, int m, CounterRng& rng) {
  Eigen::MatrixXd psi(t, m);
  psi.col(0).setOnes();
  for (int c = 1; c < m; ++c)
    for (int r = 0; r < t; ++r) psi(r, c) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(psi);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(t, m);
  q *= std::sqrt(static_cast<double>(t));
  if (q(0, 0) < 0) q *= -1.0;
  return q;
}

// Degenerate "posterior": every draw equals the given coefficient vector.
PosteriorDraws point_mass_draws(const Eigen::VectorXd& coef, int n_draws = 8) {
  PosteriorDraws draws;
  const int m = static_cast<int>(coef.size());
  draws.draws = coef.transpose().replicate(n_draws, 1);
  draws.n_chains = 1;
  draws.n_warmup = 0;
  draws.n_iterations = n_draws;
  draws.chain = Eigen::VectorXi::Zero(n_draws);
  draws.iteration = Eigen::VectorXi::LinSpaced(n_draws, 0, n_draws - 1);
  draws.divergent.assign(n_draws, 0);
  for (int i = 0; i < m; ++i) {
    draws.names.push_back("c" + std::to_string(i));
    draws.coef_cols.push_back(i);
    draws.coef_labels.push_back(i);
  }
  return draws;
}

}  // namespace

TEST_CASE("select_sobol") {
  Eigen::VectorXd coef(4);
  coef << 1.0, 0.5, 0.3, 0.2;
  const SobolReport report = sobol_indices(point_mass_draws(coef, 10));

  SECTION("top indices in order, constant always included") {
    const SelectionResult sel = select_sobol(report, 2);
    REQUIRE(sel.indices.size() == 3);
    CHECK(sel.indices[0] == 0);
    CHECK(sel.indices[1] == 1);
    CHECK(sel.indices[2] == 2);
  }
  SECTION("M_sel bounds") {
    CHECK_NOTHROW(select_sobol(report, 3));  // M_sel = M - 1 is the largest legal value
    CHECK_THROWS_AS(select_sobol(report, 4), ShapeError);
    CHECK_THROWS_AS(select_sobol(report, 0), ShapeError);
  }
  SECTION("exact ties break toward the lower basis index") {
    Eigen::VectorXd tied(5);
    tied << 1.0, 0.4, -0.4, 0.4, 0.1;
    const SobolReport tied_report = sobol_indices(point_mass_draws(tied));
    const SelectionResult sel = select_sobol(tied_report, 3);
    CHECK(sel.indices == std::vector<int>{0, 1, 2, 3});
  }
  SECTION("selection is a deterministic function of the report") {
    const SelectionResult a = select_sobol(report, 2);
    const SelectionResult b = select_sobol(report, 2);
    CHECK(a.indices == b.indices);
  }
}

TEST_CASE("lasso path on an orthonormal design recovers the support in order") {
  CounterRng rng(3);
  const int t = 50, m = 10;
  const Eigen::MatrixXd psi = orthonormal_design(t, m, rng);
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(m);
  coef[0] = 1.0;
  coef[3] = 2.0;
  coef[7] = -1.2;
  coef[5] = 0.6;
  const Eigen::VectorXd y = psi * coef;

  const LassoPath path = lasso_entry_path(psi.rightCols(m - 1), y);
  // Brute force: on orthonormal columns, entry order is |coefficient| order.
  std::vector<int> expected{2, 6, 4};  // columns of the non-constant block
  REQUIRE(path.entry_order.size() >= 3);
  CHECK(path.entry_order[0] == expected[0]);
  CHECK(path.entry_order[1] == expected[1]);
  CHECK(path.entry_order[2] == expected[2]);
  for (std::size_t i = 1; i < path.entry_lambda.size(); ++i)
    CHECK(path.entry_lambda[i] <= path.entry_lambda[i - 1] + 1e-15);
}

TEST_CASE("select_projpred") {
  CounterRng rng(5);
  const int t = 50, m = 10;
  const Eigen::MatrixXd psi = orthonormal_design(t, m, rng);
  DesignMatrix design;
  design.values = psi;

  Eigen::VectorXd coef = Eigen::VectorXd::Zero(m);
  coef[0] = 0.5;
  coef[2] = 1.5;
  coef[6] = -2.0;
  coef[9] = 0.9;
  const PosteriorDraws draws = point_mass_draws(coef);

  SECTION("recovers exactly the true support first") {
    const SelectionResult sel = select_projpred(draws, design, 3);
    REQUIRE(sel.indices.size() == 4);
    CHECK(sel.indices[0] == 0);
    CHECK(std::vector<int>(sel.indices.begin() + 1, sel.indices.end()) ==
          std::vector<int>{6, 2, 9});
    CHECK_FALSE(sel.truncated_path);
  }
  SECTION("entry order is invariant to rescaling the cluster center") {
    const SelectionResult base = select_projpred(draws, design, 3);
    const PosteriorDraws scaled = point_mass_draws(10.0 * coef);
    const SelectionResult rescaled = select_projpred(scaled, design, 3);
    CHECK(base.indices == rescaled.indices);
  }
  SECTION("full selection projects to the least-squares refit") {
    Eigen::VectorXd dense(m);
    for (int i = 0; i < m; ++i) dense[i] = 0.5 + 0.3 * i;  // every column participates
    const PosteriorDraws dense_draws = point_mass_draws(dense);
    const SelectionResult sel = select_projpred(dense_draws, design, m - 1);
    REQUIRE(static_cast<int>(sel.indices.size()) == m);
    const Eigen::VectorXd center = psi * dense;
    Eigen::MatrixXd sub(t, m);
    for (int i = 0; i < m; ++i) sub.col(i) = psi.col(sel.indices[i]);
    const Eigen::VectorXd ls = sub.colPivHouseholderQr().solve(center);
    CHECK((sel.projection - ls).cwiseAbs().maxCoeff() < 1e-10);
  }
  SECTION("exhausted active set truncates with a warning flag") {
    const SelectionResult sel = select_projpred(draws, design, 8);
    CHECK(sel.truncated_path);
    // Only the three true support columns can ever enter.
    CHECK(static_cast<int>(sel.indices.size()) == 4);
  }
}

TEST_CASE("both selection methods recover the true support on orthonormal designs") {
  CounterRng rng(7);
  for (int m : {6, 12}) {
    const int t = 4 * m;
    const Eigen::MatrixXd psi = orthonormal_design(t, m, rng);
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(m);
    coef[0] = 0.3;
    std::vector<int> support;
    for (int i = 1; i < m; i += 3) {
      coef[i] = (i % 2 == 0 ? -1.0 : 1.0) * (1.0 + 0.25 * i);
      support.push_back(i);
    }
    const PosteriorDraws draws = point_mass_draws(coef);
    DesignMatrix design;
    design.values = psi;

    const int m_sel = static_cast<int>(support.size());
    const SelectionResult via_l1 = select_projpred(draws, design, m_sel);
    const SobolReport report = sobol_indices(draws);
    const SelectionResult via_sobol = select_sobol(report, m_sel);

    auto sorted_tail = [](const SelectionResult& sel) {
      std::vector<int> tail(sel.indices.begin() + 1, sel.indices.end());
      std::sort(tail.begin(), tail.end());
      return tail;
    };
    CHECK(sorted_tail(via_l1) == support);
    CHECK(sorted_tail(via_sobol) == support);
  }
}

TEST_CASE("refit_sparse") {
  CounterRng rng(11);
  const int t = 60, m = 6;
  const Eigen::MatrixXd psi = orthonormal_design(t, m, rng);
  Eigen::VectorXd truth(m);
  truth << 1.0, 0.8, -0.6, 0.0, 0.0, 0.4;
  Eigen::VectorXd y = psi * truth;
  for (int r = 0; r < t; ++r) y[r] += 0.15 * rng.normal();
  DesignMatrix design;
  design.values = psi;
  const R2D2Config prior = default_r2d2_config(y);

  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.iterations = 1500;
  cfg.warmup = 750;
  cfg.seed = 2;

  SECTION("identity selection reproduces reference posterior means") {
    const FitResult reference = fit_r2d2(psi, y, prior, cfg);
    SelectionResult identity;
    identity.method = SelectionResult::Method::SobolGreedy;
    identity.m_sel = m - 1;
    identity.indices = {0, 1, 2, 3, 4, 5};
    SamplerConfig cfg2 = cfg;
    cfg2.seed = 3;
    const FitResult refit = refit_sparse(identity, design, y, prior, cfg2);
    for (int i = 0; i < m; ++i) {
      const double mcse_a = mcse_mean(reference.draws, reference.diagnostics, i);
      const double mcse_b = mcse_mean(refit.draws, refit.diagnostics, i);
      const double tolerance = 3.0 * std::sqrt(mcse_a * mcse_a + mcse_b * mcse_b);
      CHECK(std::abs(reference.draws.draws.col(i).mean() - refit.draws.draws.col(i).mean()) <
            tolerance + 1e-12);
    }
  }
  SECTION("subset refit keeps the selected labels") {
    SelectionResult sel;
    sel.method = SelectionResult::Method::Projpred;
    sel.m_sel = 2;
    sel.indices = {0, 2, 5};
    const FitResult refit = refit_sparse(sel, design, y, prior, cfg);
    CHECK(refit.draws.coef_labels == std::vector<int>{0, 2, 5});
    CHECK(refit.draws.names[0] == "c0");
    CHECK(refit.draws.names[1] == "c2");
    CHECK(refit.draws.names[2] == "c5");
    CHECK(refit.draws.names[3] == "sigma");
  }
  SECTION("selection without the constant term is rejected") {
    SelectionResult sel;
    sel.indices = {2, 5};
    CHECK_THROWS_AS(refit_sparse(sel, design, y, prior, cfg), ShapeError);
  }
}
